//! Driving and selection measures computed from event logs.
//!
//! LLM is the sample SD of lateral deviation from the reference lane center,
//! SM the sample SD of speed in km/h, SR the share of successful targets and
//! TCT the time from the first activation for a target to its successful
//! confirmation. All are taken over the measurement window, which opens at
//! the first tick the speed is within the permitted band.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::log::{Event, EventLog};
use crate::session::{Outcome, OutcomeCounts};
use crate::vehicle::{classify_speed, SpeedAlarm, SpeedPolicy};
use crate::world::BuildingId;

pub const REPORT_FORMAT: &str = "pointselect-report";
pub const REPORT_VERSION: u32 = 1;
/// Fewer assigned targets than this are flagged in the report.
pub const MIN_TARGETS: u32 = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need at least 2 samples, got {0}")]
    InsufficientData(usize),
    #[error("success rate undefined without outcomes")]
    UndefinedRate,
    #[error("speed never reached the permitted band")]
    NoWindow,
    #[error("log integrity: {0}")]
    Integrity(String),
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Unbiased sample standard deviation (divisor n − 1).
///
/// Two passes with compensated sums plus the usual correction term for the
/// residual error of the mean.
pub fn sample_sd(values: &[f64]) -> Result<f64, MetricsError> {
    let n = values.len();
    if n < 2 {
        return Err(MetricsError::InsufficientData(n));
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    let resid = compensated_sum(values.iter().map(|v| v - mean));
    let var = (ss - resid * resid / n as f64) / (n - 1) as f64;
    Ok(var.max(0.0).sqrt())
}

pub fn success_rate(counts: &OutcomeCounts) -> Result<f64, MetricsError> {
    let total = counts.total();
    if total == 0 {
        return Err(MetricsError::UndefinedRate);
    }
    Ok(counts.success as f64 / total as f64 * 100.0)
}

/// Road width taken by the vehicle plus its lateral spread, to the nanometre.
pub fn occupied_width(deviation_m: f64, vehicle_width_m: f64) -> f64 {
    ((vehicle_width_m + deviation_m) * 1e9).round() / 1e9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementWindow {
    pub start_tick: u64,
    pub end_tick: u64,
}

impl MeasurementWindow {
    pub fn contains(&self, tick: u64) -> bool {
        (self.start_tick..=self.end_tick).contains(&tick)
    }
}

pub fn measurement_window(log: &EventLog, policy: &SpeedPolicy) -> Result<MeasurementWindow, MetricsError> {
    let mut start = None;
    let mut end = None;
    for (tick, s) in log.states() {
        if start.is_none() && classify_speed(s.speed_mps * 3.6, policy) == SpeedAlarm::InRange {
            start = Some(tick);
        }
        end = Some(tick);
    }
    match (start, end) {
        (Some(start_tick), Some(end_tick)) => Ok(MeasurementWindow { start_tick, end_tick }),
        _ => Err(MetricsError::NoWindow),
    }
}

fn window_values(log: &EventLog, window: &MeasurementWindow, f: impl Fn(&crate::harness::log::StatePayload) -> f64) -> Vec<f64> {
    log.states().filter(|(t, _)| window.contains(*t)).map(|(_, s)| f(s)).collect()
}

/// Lane lateral movement: SD of deviation from the lane center, meters.
pub fn compute_llm(log: &EventLog, window: &MeasurementWindow) -> Result<f64, MetricsError> {
    sample_sd(&window_values(log, window, |s| s.deviation_m))
}

/// Speed maintenance: SD of speed, km/h.
pub fn compute_sm(log: &EventLog, window: &MeasurementWindow) -> Result<f64, MetricsError> {
    sample_sd(&window_values(log, window, |s| s.speed_mps * 3.6))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TctSummary {
    pub list_s: Vec<f64>,
    pub mean_s: Option<f64>,
    pub sd_s: Option<f64>,
}

/// Completion time of every successful target, from the first activation
/// attempt for that target to the confirming press.
pub fn task_completion_times(log: &EventLog) -> Result<TctSummary, MetricsError> {
    let dt = log.header.config.dt_s;
    let mut target: Option<BuildingId> = None;
    let mut first_activation: Option<u64> = None;
    let mut list = Vec::new();
    for r in &log.records {
        match &r.event {
            Event::TargetAssigned { target: t, .. } => {
                target = Some(*t);
                first_activation = None;
            }
            Event::CandidateChanged { .. } | Event::RoughMiss { .. } => {
                if target.is_some() && first_activation.is_none() {
                    first_activation = Some(r.tick);
                }
            }
            Event::Outcome { target: t, outcome, .. } => {
                if *outcome == Outcome::Success {
                    let a = first_activation.ok_or_else(|| {
                        MetricsError::Integrity(format!("success for {t} at tick {} without activation", r.tick))
                    })?;
                    list.push((r.tick - a) as f64 * dt);
                }
                if outcome.is_terminal() {
                    target = None;
                    first_activation = None;
                }
            }
            _ => {}
        }
    }
    let mean_s = (!list.is_empty()).then(|| compensated_sum(list.iter().copied()) / list.len() as f64);
    let sd_s = sample_sd(&list).ok();
    Ok(TctSummary { list_s: list, mean_s, sd_s })
}

pub fn outcome_counts(log: &EventLog) -> OutcomeCounts {
    let mut c = OutcomeCounts::default();
    for r in &log.records {
        if let Event::Outcome { outcome, .. } = r.event {
            c.record(outcome);
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format: String,
    pub version: u32,
    pub log_hash: String,
    pub window: MeasurementWindow,
    pub sample_count: usize,
    pub llm_m: f64,
    pub sm_kmh: f64,
    pub sr_percent: Option<f64>,
    /// Why `sr_percent` is absent.
    pub sr_note: Option<String>,
    pub tct: TctSummary,
    pub counts: OutcomeCounts,
    pub targets_assigned: u32,
    /// Set when fewer than 25 targets were assigned.
    pub low_target_count: bool,
    pub max_abs_deviation_m: f64,
    pub occupied_mean_m: f64,
    pub occupied_max_m: f64,
}

pub fn build_report(log: &EventLog) -> Result<MetricsReport, MetricsError> {
    let issues = crate::harness::log::check_integrity(log);
    if let Some(i) = issues.first() {
        return Err(MetricsError::Integrity(format!("record {}: {}", i.record_index, i.message)));
    }
    let window = measurement_window(log, &log.header.config.speed)?;
    let deviations = window_values(log, &window, |s| s.deviation_m);
    let llm_m = sample_sd(&deviations)?;
    let sm_kmh = compute_sm(log, &window)?;
    let counts = outcome_counts(log);
    let (sr_percent, sr_note) = match success_rate(&counts) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let tct = task_completion_times(log)?;
    let targets_assigned =
        log.records.iter().filter(|r| matches!(r.event, Event::TargetAssigned { .. })).count() as u32;
    let max_abs_deviation_m = deviations.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let width = log.header.config.vehicle.width_m;
    Ok(MetricsReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        log_hash: log.hash_hex(),
        window,
        sample_count: deviations.len(),
        llm_m,
        sm_kmh,
        sr_percent,
        sr_note,
        tct,
        counts,
        targets_assigned,
        low_target_count: targets_assigned < MIN_TARGETS,
        max_abs_deviation_m,
        occupied_mean_m: occupied_width(llm_m, width),
        occupied_max_m: occupied_width(max_abs_deviation_m, width),
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>, unit: &str| v.map_or("n/a".to_string(), |x| format!("{x:.3} {unit}"));
        let mut rows = vec![
            ("window (ticks)", format!("{}..={}", self.window.start_tick, self.window.end_tick)),
            ("samples", self.sample_count.to_string()),
            ("LLM", format!("{:.3} m", self.llm_m)),
            ("SM", format!("{:.3} km/h", self.sm_kmh)),
            ("SR", opt(self.sr_percent, "%")),
            ("success / wrong / missed", format!("{} / {} / {}", self.counts.success, self.counts.wrong, self.counts.missed)),
            ("targets assigned", format!("{}{}", self.targets_assigned, if self.low_target_count { " (below 25)" } else { "" })),
            ("TCT mean", opt(self.tct.mean_s, "s")),
            ("TCT SD", opt(self.tct.sd_s, "s")),
            ("occupied width (mean)", format!("{:.3} m", self.occupied_mean_m)),
            ("occupied width (max)", format!("{:.3} m", self.occupied_max_m)),
            ("log hash", self.log_hash.clone()),
        ];
        if let Some(n) = &self.sr_note {
            rows.push(("SR note", n.clone()));
        }
        let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
    }
}
