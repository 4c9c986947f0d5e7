//! Session configuration.

use serde::{Deserialize, Serialize};

use crate::pointing::{Calibration, ResolveParams};
use crate::session::{NavParams, TaskParams};
use crate::vehicle::{SpeedPolicy, VehicleParams, DT_S};
use crate::world::{CourseParams, SceneParams};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Driving only; no targets are assigned.
    #[serde(alias = "c1")]
    DrivingOnly,
    /// Driving while selecting assigned targets.
    #[serde(alias = "c2")]
    DrivingWithInput,
}

impl Condition {
    pub fn parse(s: &str) -> Option<Condition> {
        match s {
            "c1" | "driving_only" => Some(Condition::DrivingOnly),
            "c2" | "driving_with_input" => Some(Condition::DrivingWithInput),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriverParams {
    pub lookahead_min_m: f64,
    /// Lookahead distance per unit speed.
    pub lookahead_gain_s: f64,
    /// Proportional speed gain.
    pub speed_gain_per_s: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        Self { lookahead_min_m: 6.0, lookahead_gain_s: 0.6, speed_gain_per_s: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointerParams {
    /// Gaussian angular noise per axis, degrees.
    pub noise_deg: f64,
    /// From target assignment to the first Activate.
    pub notice_delay_s: f64,
    /// From Activate until the candidate has been identified.
    pub reaction_delay_s: f64,
    pub arrow_delay_s: f64,
    /// From identifying the target as candidate to pressing Confirm.
    pub confirm_delay_s: f64,
    /// Longer arrow routes are abandoned for a fresh pointing attempt.
    pub max_arrows: u32,
    /// Fingertip position in the cabin frame.
    pub hand_anchor: [f64; 3],
    pub finger_length_m: f64,
    /// When set, a wrong candidate separated from the target by angle `a` is
    /// taken for the target with probability `exp(-a^2 / (2 sigma^2))`.
    /// Off by default: the agent then always recognizes the target.
    pub misjudge: bool,
}

impl Default for PointerParams {
    fn default() -> Self {
        Self {
            noise_deg: 0.0,
            notice_delay_s: 0.5,
            reaction_delay_s: 0.5,
            arrow_delay_s: 0.3,
            confirm_delay_s: 0.3,
            max_arrows: 4,
            hand_anchor: [0.25, -0.3, 0.5],
            finger_length_m: 0.05,
            misjudge: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Master seed; scenario and every RNG substream derive from it.
    pub seed: u64,
    pub course: CourseParams,
    pub scene: SceneParams,
    pub speed: SpeedPolicy,
    pub duration_s: f64,
    pub dt_s: f64,
    pub condition: Condition,
    pub lane: u32,
    pub vehicle: VehicleParams,
    pub driver: DriverParams,
    pub pointer: PointerParams,
    /// Sensor calibration applied to every hand sample.
    pub calibration: Calibration,
    pub resolve: ResolveParams,
    pub nav: NavParams,
    pub task: TaskParams,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            course: CourseParams::default(),
            scene: SceneParams::default(),
            speed: SpeedPolicy::new(50.0),
            duration_s: 300.0,
            dt_s: DT_S,
            condition: Condition::DrivingWithInput,
            lane: 1,
            vehicle: VehicleParams::default(),
            driver: DriverParams::default(),
            pointer: PointerParams::default(),
            calibration: Calibration::IDENTITY,
            resolve: ResolveParams::default(),
            nav: NavParams::default(),
            task: TaskParams::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be > 0");
        }
        if self.dt_s != DT_S || self.task.dt_s != DT_S {
            return bad("dt_s is fixed at 1/60 s");
        }
        if !self.speed.is_valid() {
            return bad("speed target must exceed tolerance >= 0");
        }
        if self.lane == 0 || self.lane > self.course.lane_count {
            return bad("lane out of range");
        }
        if !self.calibration.is_valid() {
            return bad("calibration gains must be > 0");
        }
        if !self.resolve.is_valid() {
            return bad("resolve params out of range");
        }
        let p = &self.pointer;
        let delays = [p.notice_delay_s, p.reaction_delay_s, p.arrow_delay_s, p.confirm_delay_s];
        if !(p.noise_deg >= 0.0 && delays.iter().all(|d| *d >= 0.0 && d.is_finite())) {
            return bad("pointer noise and delays must be >= 0");
        }
        if !(p.finger_length_m > 0.0) {
            return bad("finger_length_m must be > 0");
        }
        let t = &self.task;
        if !(t.reassign_delay_s.lo >= 0.0 && t.reassign_delay_s.lo <= t.reassign_delay_s.hi) {
            return bad("reassign delay interval invalid");
        }
        if !(t.min_lead_m >= 0.0 && t.assign_range_m > t.min_lead_m) {
            return bad("assignment window invalid");
        }
        self.course.validate()?;
        self.scene.validate()?;
        self.vehicle.validate()?;
        Ok(())
    }

    pub fn total_ticks(&self) -> u64 {
        (self.duration_s / self.dt_s).round() as u64
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Ticks covering a duration, rounded to nearest.
pub fn ticks(seconds: f64, dt_s: f64) -> u64 {
    (seconds / dt_s).round() as u64
}
