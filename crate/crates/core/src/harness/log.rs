//! JSON-lines event log: encoding, hashing and integrity checks.
//!
//! A log is a header line, one line per record, and an optional footer
//! carrying the record count and hash. The hash is FNV-1a 64 over the
//! canonical encoding of every record, each followed by `\n`.

use std::collections::HashSet;
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geom::Vec3;
use crate::pointing::Calibration;
use crate::session::{Arrow, Button, Outcome, Phase};
use crate::vehicle::{Controls, SpeedAlarm};
use crate::world::BuildingId;

use super::config::SessionConfig;
use super::HarnessError;

pub const LOG_FORMAT: &str = "pointselect-log";
pub const LOG_VERSION: u32 = 1;
pub const HASH_ALG: &str = "fnv1a64";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub hash_alg: String,
    pub generator: String,
    pub config: SessionConfig,
    pub calibration: Calibration,
    /// FNV-1a 64 of the scenario document the session ran on.
    pub scenario_digest: String,
}

impl LogHeader {
    pub fn new(config: &SessionConfig, scenario_digest: String) -> Self {
        Self {
            format: LOG_FORMAT.into(),
            version: LOG_VERSION,
            hash_alg: HASH_ALG.into(),
            generator: concat!("pointselect ", env!("CARGO_PKG_VERSION")).into(),
            config: config.clone(),
            calibration: config.calibration,
            scenario_digest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatePayload {
    pub position: Vec3,
    pub heading_rad: f64,
    pub speed_mps: f64,
    pub s_m: f64,
    pub lateral_m: f64,
    /// Signed offset from the reference lane center.
    pub deviation_m: f64,
    pub alarm: SpeedAlarm,
    /// Controls applied during this tick's step.
    pub controls: Controls,
    pub phase: Phase,
    pub target: Option<BuildingId>,
    /// Hash of every record written before this one.
    pub chain: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    State(StatePayload),
    Hand { tip: Vec3, joint3: Vec3 },
    Button { id: Button },
    CandidateChanged { candidate: BuildingId, s_capture_m: f64 },
    RoughMiss { s_capture_m: f64 },
    CursorMoved { dir: Arrow, from: BuildingId, to: BuildingId },
    CursorBlocked { dir: Arrow, at: BuildingId },
    ViewShift { from_s_m: f64, to_s_m: f64 },
    Confirm { candidate: BuildingId },
    Cancel { candidate: BuildingId },
    Ignored { button: Button, reason: String },
    TargetAssigned { target: BuildingId, lead_m: f64 },
    Outcome {
        target: BuildingId,
        outcome: Outcome,
        confirmed: Option<BuildingId>,
        passed_tick: Option<u64>,
        tct_ticks: Option<u64>,
    },
    ReassignScheduled { at_tick: u64 },
    AlarmChanged { from: SpeedAlarm, to: SpeedAlarm },
}

/// Payload structs give the wire layout of each kind.
mod wire {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Hand {
        pub tip: Vec3,
        pub joint3: Vec3,
    }
    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Button {
        pub id: super::Button,
    }
    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Candidate {
        pub candidate: BuildingId,
        pub s_capture_m: f64,
    }
    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RoughMiss {
        pub s_capture_m: f64,
    }
    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct CursorMoved {
        pub dir: Arrow,
        pub from: BuildingId,
        pub to: BuildingId,
    }
    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct CursorBlocked {
        pub dir: Arrow,
        pub at: BuildingId,
    }
    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct ViewShift {
        pub from_s_m: f64,
        pub to_s_m: f64,
    }
    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Selected {
        pub candidate: BuildingId,
    }
    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Ignored {
        pub button: super::Button,
        pub reason: String,
    }
    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Assigned {
        pub target: BuildingId,
        pub lead_m: f64,
    }
    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Outcome {
        pub target: BuildingId,
        pub outcome: super::Outcome,
        pub confirmed: Option<BuildingId>,
        pub passed_tick: Option<u64>,
        pub tct_ticks: Option<u64>,
    }
    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Reassign {
        pub at_tick: u64,
    }
    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Alarm {
        pub from: SpeedAlarm,
        pub to: SpeedAlarm,
    }
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::State(_) => "state",
            Event::Hand { .. } => "hand",
            Event::Button { .. } => "button",
            Event::CandidateChanged { .. } => "candidate_changed",
            Event::RoughMiss { .. } => "rough_miss",
            Event::CursorMoved { .. } => "cursor_moved",
            Event::CursorBlocked { .. } => "cursor_blocked",
            Event::ViewShift { .. } => "view_shift",
            Event::Confirm { .. } => "confirm",
            Event::Cancel { .. } => "cancel",
            Event::Ignored { .. } => "ignored",
            Event::TargetAssigned { .. } => "target_assigned",
            Event::Outcome { .. } => "outcome",
            Event::ReassignScheduled { .. } => "reassign_scheduled",
            Event::AlarmChanged { .. } => "alarm_changed",
        }
    }

    /// Inputs from outside the simulation (the replay feed).
    pub fn is_input(&self) -> bool {
        matches!(self, Event::Hand { .. } | Event::Button { .. })
    }

    fn payload(&self) -> Value {
        let v = match self.clone() {
            Event::State(p) => serde_json::to_value(p),
            Event::Hand { tip, joint3 } => serde_json::to_value(wire::Hand { tip, joint3 }),
            Event::Button { id } => serde_json::to_value(wire::Button { id }),
            Event::CandidateChanged { candidate, s_capture_m } => {
                serde_json::to_value(wire::Candidate { candidate, s_capture_m })
            }
            Event::RoughMiss { s_capture_m } => serde_json::to_value(wire::RoughMiss { s_capture_m }),
            Event::CursorMoved { dir, from, to } => serde_json::to_value(wire::CursorMoved { dir, from, to }),
            Event::CursorBlocked { dir, at } => serde_json::to_value(wire::CursorBlocked { dir, at }),
            Event::ViewShift { from_s_m, to_s_m } => serde_json::to_value(wire::ViewShift { from_s_m, to_s_m }),
            Event::Confirm { candidate } | Event::Cancel { candidate } => {
                serde_json::to_value(wire::Selected { candidate })
            }
            Event::Ignored { button, reason } => serde_json::to_value(wire::Ignored { button, reason }),
            Event::TargetAssigned { target, lead_m } => serde_json::to_value(wire::Assigned { target, lead_m }),
            Event::Outcome { target, outcome, confirmed, passed_tick, tct_ticks } => {
                serde_json::to_value(wire::Outcome { target, outcome, confirmed, passed_tick, tct_ticks })
            }
            Event::ReassignScheduled { at_tick } => serde_json::to_value(wire::Reassign { at_tick }),
            Event::AlarmChanged { from, to } => serde_json::to_value(wire::Alarm { from, to }),
        };
        v.expect("payload serializes")
    }

    fn from_parts(kind: &str, payload: Value) -> Result<Event, String> {
        fn p<T: serde::de::DeserializeOwned>(v: Value) -> Result<T, String> {
            serde_json::from_value(v).map_err(|e| e.to_string())
        }
        Ok(match kind {
            "state" => Event::State(p(payload)?),
            "hand" => {
                let w: wire::Hand = p(payload)?;
                Event::Hand { tip: w.tip, joint3: w.joint3 }
            }
            "button" => Event::Button { id: p::<wire::Button>(payload)?.id },
            "candidate_changed" => {
                let w: wire::Candidate = p(payload)?;
                Event::CandidateChanged { candidate: w.candidate, s_capture_m: w.s_capture_m }
            }
            "rough_miss" => Event::RoughMiss { s_capture_m: p::<wire::RoughMiss>(payload)?.s_capture_m },
            "cursor_moved" => {
                let w: wire::CursorMoved = p(payload)?;
                Event::CursorMoved { dir: w.dir, from: w.from, to: w.to }
            }
            "cursor_blocked" => {
                let w: wire::CursorBlocked = p(payload)?;
                Event::CursorBlocked { dir: w.dir, at: w.at }
            }
            "view_shift" => {
                let w: wire::ViewShift = p(payload)?;
                Event::ViewShift { from_s_m: w.from_s_m, to_s_m: w.to_s_m }
            }
            "confirm" => Event::Confirm { candidate: p::<wire::Selected>(payload)?.candidate },
            "cancel" => Event::Cancel { candidate: p::<wire::Selected>(payload)?.candidate },
            "ignored" => {
                let w: wire::Ignored = p(payload)?;
                Event::Ignored { button: w.button, reason: w.reason }
            }
            "target_assigned" => {
                let w: wire::Assigned = p(payload)?;
                Event::TargetAssigned { target: w.target, lead_m: w.lead_m }
            }
            "outcome" => {
                let w: wire::Outcome = p(payload)?;
                Event::Outcome {
                    target: w.target,
                    outcome: w.outcome,
                    confirmed: w.confirmed,
                    passed_tick: w.passed_tick,
                    tct_ticks: w.tct_ticks,
                }
            }
            "reassign_scheduled" => Event::ReassignScheduled { at_tick: p::<wire::Reassign>(payload)?.at_tick },
            "alarm_changed" => {
                let w: wire::Alarm = p(payload)?;
                Event::AlarmChanged { from: w.from, to: w.to }
            }
            other => return Err(format!("unknown record kind {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub tick: u64,
    pub t_s: f64,
    pub event: Event,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    tick: u64,
    t_s: f64,
    kind: String,
    payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFooter {
    pub record_count: u64,
    pub hash: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    header: LogHeader,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FooterLine {
    footer: LogFooter,
}

pub fn encode_event(record: &EventRecord) -> String {
    let raw = RawRecord {
        tick: record.tick,
        t_s: record.t_s,
        kind: record.event.kind().to_string(),
        payload: record.event.payload(),
    };
    serde_json::to_string(&raw).expect("record serializes")
}

/// Parses one record line. Lines must be in canonical form, so two spellings
/// of the same number cannot hide an edit from the hash check.
pub fn decode_event(line: &str) -> Result<EventRecord, String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let event = Event::from_parts(&raw.kind, raw.payload)?;
    let record = EventRecord { tick: raw.tick, t_s: raw.t_s, event };
    if encode_event(&record) != line {
        return Err("record is not in canonical form".into());
    }
    Ok(record)
}

/// Streaming FNV-1a 64 over canonical record lines.
pub struct LogHasher(FnvHasher);

impl Clone for LogHasher {
    fn clone(&self) -> Self {
        Self(FnvHasher::with_key(self.0.finish()))
    }
}

impl std::fmt::Debug for LogHasher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LogHasher({})", format_hash(self.finish()))
    }
}

impl Default for LogHasher {
    fn default() -> Self {
        Self(FnvHasher::default())
    }
}

impl LogHasher {
    pub fn push_line(&mut self, line: &str) {
        self.0.write(line.as_bytes());
        self.0.write(b"\n");
    }

    pub fn finish(&self) -> u64 {
        self.0.finish()
    }
}

pub fn format_hash(h: u64) -> String {
    format!("{h:016x}")
}

/// FNV-1a 64 of arbitrary bytes, hex encoded.
pub fn digest_hex(bytes: &[u8]) -> String {
    let mut h = FnvHasher::default();
    h.write(bytes);
    format_hash(h.finish())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub header: LogHeader,
    pub records: Vec<EventRecord>,
    pub footer: Option<LogFooter>,
}

impl EventLog {
    pub fn new(header: LogHeader) -> Self {
        Self { header, records: Vec::new(), footer: None }
    }

    pub fn compute_hash(&self) -> u64 {
        let mut h = LogHasher::default();
        for r in &self.records {
            h.push_line(&encode_event(r));
        }
        h.finish()
    }

    pub fn hash_hex(&self) -> String {
        format_hash(self.compute_hash())
    }

    /// Seals the log with a footer over the current records.
    pub fn finalize(&mut self) {
        self.footer = Some(LogFooter { record_count: self.records.len() as u64, hash: self.hash_hex() });
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&HeaderLine { header: self.header.clone() }).expect("header");
        out.push('\n');
        for r in &self.records {
            out.push_str(&encode_event(r));
            out.push('\n');
        }
        if let Some(f) = &self.footer {
            out.push_str(&serde_json::to_string(&FooterLine { footer: f.clone() }).expect("footer"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<EventLog, HarnessError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(HarnessError::Parse { line: 1, message: "empty log".into() })?;
        let header = serde_json::from_str::<HeaderLine>(first)
            .map_err(|e| HarnessError::Parse { line: 1, message: format!("header: {e}") })?
            .header;
        if header.format != LOG_FORMAT || header.version != LOG_VERSION || header.hash_alg != HASH_ALG {
            return Err(HarnessError::Parse {
                line: 1,
                message: format!("unsupported log {} v{} ({})", header.format, header.version, header.hash_alg),
            });
        }
        let mut log = EventLog::new(header);
        for (i, line) in lines {
            let lineno = i + 1;
            if log.footer.is_some() {
                return Err(HarnessError::Parse { line: lineno, message: "content after footer".into() });
            }
            if line.starts_with("{\"footer\"") {
                let f = serde_json::from_str::<FooterLine>(line)
                    .map_err(|e| HarnessError::Parse { line: lineno, message: format!("footer: {e}") })?;
                log.footer = Some(f.footer);
                continue;
            }
            let r = decode_event(line).map_err(|message| HarnessError::Parse { line: lineno, message })?;
            log.records.push(r);
        }
        Ok(log)
    }

    pub fn write_to(&self, path: &std::path::Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read_from(path: &std::path::Path) -> Result<EventLog, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        EventLog::from_jsonl(&text)
    }

    pub fn states(&self) -> impl Iterator<Item = (u64, &StatePayload)> {
        self.records.iter().filter_map(|r| match &r.event {
            Event::State(s) => Some((r.tick, s)),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrityIssue {
    pub record_index: usize,
    pub tick: u64,
    pub message: String,
}

/// Structural checks that hold for every well-formed log.
pub fn check_integrity(log: &EventLog) -> Vec<IntegrityIssue> {
    let mut issues = Vec::new();
    let mut push = |i: usize, tick: u64, m: String| issues.push(IntegrityIssue { record_index: i, tick, message: m });
    let mut last_tick = 0u64;
    let mut last_state_tick: Option<u64> = None;
    let mut target: Option<BuildingId> = None;
    let mut finished: HashSet<(BuildingId, u64)> = HashSet::new();
    let mut assigned_at = 0u64;
    for (i, r) in log.records.iter().enumerate() {
        if r.tick < last_tick {
            push(i, r.tick, format!("tick {} after {}", r.tick, last_tick));
        }
        last_tick = r.tick;
        match &r.event {
            Event::State(_) => {
                if last_state_tick.is_some_and(|t| t >= r.tick) {
                    push(i, r.tick, "duplicate state record for tick".into());
                }
                last_state_tick = Some(r.tick);
            }
            Event::TargetAssigned { target: t, .. } => {
                if target.is_some() {
                    push(i, r.tick, "target assigned while another is active".into());
                }
                target = Some(*t);
                assigned_at = r.tick;
            }
            Event::Outcome { target: t, outcome, .. } => {
                if target != Some(*t) {
                    push(i, r.tick, format!("outcome for {t} without matching assignment"));
                } else if outcome.is_terminal() {
                    if !finished.insert((*t, assigned_at)) {
                        push(i, r.tick, format!("second terminal outcome for {t}"));
                    }
                    target = None;
                }
            }
            _ => {}
        }
    }
    if let Some(f) = &log.footer {
        if f.record_count != log.records.len() as u64 {
            push(log.records.len(), last_tick, format!("footer counts {} records", f.record_count));
        }
        if f.hash != log.hash_hex() {
            push(log.records.len(), last_tick, "footer hash mismatch".into());
        }
    }
    issues
}
