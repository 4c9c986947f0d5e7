//! Re-simulation of a log from its header and recorded inputs.

use serde::Serialize;

use super::log::{encode_event, Event, EventLog};
use super::sim::{Input, Simulation};
use super::HarnessError;
use crate::pointing::HandSample;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ReplayVerdict {
    Verified { hash: String, records: usize },
    Diverged { tick: u64, record_index: usize, expected: Option<String>, actual: Option<String> },
    /// Every record re-simulated identically but the stored hash disagrees.
    HashMismatch { tick: u64, stored: String, recomputed: String },
    ScenarioMismatch { stored: String, regenerated: String },
}

impl ReplayVerdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, ReplayVerdict::Verified { .. })
    }
}

/// Replays `log`; the first record that differs from the re-simulation
/// names the divergent tick.
pub fn replay(log: &EventLog) -> Result<ReplayVerdict, HarnessError> {
    let probe = Simulation::new(&log.header.config)?;
    if probe.log().header.scenario_digest != log.header.scenario_digest {
        return Ok(ReplayVerdict::ScenarioMismatch {
            stored: log.header.scenario_digest.clone(),
            regenerated: probe.log().header.scenario_digest.clone(),
        });
    }
    let mut sim = probe;
    let records = &log.records;
    let mut cursor = 0;
    let mut inputs = Vec::new();
    while cursor < records.len() {
        let tick = sim.tick() + 1;
        let Some(end) = records[cursor..].iter().position(|r| matches!(r.event, Event::State(_))) else {
            return Ok(ReplayVerdict::Diverged {
                tick,
                record_index: cursor,
                expected: None,
                actual: Some(encode_event(&records[cursor])),
            });
        };
        let segment = &records[cursor..=cursor + end];
        inputs.clear();
        if let Event::State(s) = &segment[end].event {
            inputs.push(Input::Control(s.controls));
        }
        for r in segment {
            match r.event {
                Event::Hand { tip, joint3 } => inputs.push(Input::Hand(HandSample { tip, joint3, t: 0.0 })),
                Event::Button { id } => inputs.push(Input::Button(id)),
                _ => {}
            }
        }
        let first = match sim.step(&inputs) {
            Ok(i) => i,
            Err(HarnessError::Aborted { .. }) => {
                return Ok(ReplayVerdict::Diverged {
                    tick,
                    record_index: cursor,
                    expected: None,
                    actual: Some(encode_event(&segment[0])),
                })
            }
            Err(e) => return Err(e),
        };
        let produced = &sim.log().records[first..];
        for i in 0..produced.len().max(segment.len()) {
            let expected = produced.get(i).map(encode_event);
            let actual = segment.get(i).map(encode_event);
            if expected != actual {
                return Ok(ReplayVerdict::Diverged { tick, record_index: cursor + i, expected, actual });
            }
        }
        cursor += segment.len();
    }
    let recomputed = sim.log().hash_hex();
    if let Some(f) = &log.footer {
        if f.hash != recomputed || f.record_count != records.len() as u64 {
            return Ok(ReplayVerdict::HashMismatch { tick: sim.tick(), stored: f.hash.clone(), recomputed });
        }
    }
    Ok(ReplayVerdict::Verified { hash: recomputed, records: records.len() })
}
