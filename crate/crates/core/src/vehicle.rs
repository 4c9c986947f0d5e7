//! Kinematic bicycle vehicle and the speed-band alarm.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detmath;
use crate::geom::Vec3;
use crate::world::{Course, Interval, PathPose, WorldError};

/// Fixed simulation step.
pub const DT_S: f64 = 1.0 / 60.0;

pub const MPS_PER_KMH: f64 = 1.0 / 3.6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("non-finite vehicle input: {0}")]
    NonFinite(&'static str),
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub width_m: f64,
    pub wheelbase_m: f64,
    pub max_steer_rad: f64,
    pub accel_range_mps2: Interval,
    pub max_speed_mps: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            width_m: 1.86,
            wheelbase_m: 2.8,
            max_steer_rad: 0.61,
            accel_range_mps2: Interval::new(-6.0, 3.0),
            max_speed_mps: 40.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), VehicleError> {
        if !(self.width_m > 0.0) {
            return Err(VehicleError::InvalidParams("width_m must be > 0"));
        }
        if !(self.wheelbase_m > 0.0) {
            return Err(VehicleError::InvalidParams("wheelbase_m must be > 0"));
        }
        if !(self.accel_range_mps2.lo < 0.0 && self.accel_range_mps2.hi > 0.0) {
            return Err(VehicleError::InvalidParams("accel range must straddle zero"));
        }
        if !(self.max_steer_rad > 0.0 && self.max_speed_mps > 0.0) {
            return Err(VehicleError::InvalidParams("max_steer_rad and max_speed_mps must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec3,
    pub heading_rad: f64,
    pub speed_mps: f64,
    pub tick: u64,
}

impl VehicleState {
    /// At rest on the given centerline offset at arc length `s_m`.
    pub fn on_course(course: &Course, s_m: f64, lateral_m: f64) -> Result<Self, VehicleError> {
        let (pos, tan) = course.path_point(s_m)?;
        Ok(Self {
            position: pos + tan.left_normal_2d() * lateral_m,
            heading_rad: detmath::atan2(tan.y, tan.x),
            speed_mps: 0.0,
            tick: 0,
        })
    }

    pub fn speed_kmh(&self) -> f64 {
        self.speed_mps * 3.6
    }

    pub fn forward(&self) -> Vec3 {
        Vec3::new(detmath::cos(self.heading_rad), detmath::sin(self.heading_rad), 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Controls {
    pub steer_rad: f64,
    pub accel_mps2: f64,
}

impl Controls {
    pub fn clamped(self, params: &VehicleParams) -> Controls {
        Controls {
            steer_rad: self.steer_rad.clamp(-params.max_steer_rad, params.max_steer_rad),
            accel_mps2: self
                .accel_mps2
                .clamp(params.accel_range_mps2.lo, params.accel_range_mps2.hi),
        }
    }
}

/// Advances the bicycle model one step.
///
/// Speed is updated first and clamped to `[0, max_speed]`. The heading then
/// turns at the yaw rate of the mean speed over the step, and the position
/// moves the mean speed times `dt` along the mean of the old and new heading.
/// Both are second order for constant controls.
pub fn step_vehicle(
    state: &VehicleState,
    controls: Controls,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState, VehicleError> {
    if !(controls.steer_rad.is_finite() && controls.accel_mps2.is_finite()) {
        return Err(VehicleError::NonFinite("controls"));
    }
    if !(state.position.is_finite() && state.heading_rad.is_finite() && state.speed_mps.is_finite()) {
        return Err(VehicleError::NonFinite("state"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(VehicleError::NonFinite("dt"));
    }
    let c = controls.clamped(params);
    let v = state.speed_mps;
    let speed = (v + c.accel_mps2 * dt).clamp(0.0, params.max_speed_mps);
    let v_mean = 0.5 * (v + speed);
    let yaw_rate = v_mean / params.wheelbase_m * detmath::tan(c.steer_rad);
    let heading = state.heading_rad + yaw_rate * dt;
    let mid = 0.5 * (state.heading_rad + heading);
    let position = state.position
        + Vec3::new(detmath::cos(mid), detmath::sin(mid), 0.0) * (v_mean * dt);
    Ok(VehicleState {
        position,
        heading_rad: detmath::wrap_angle(heading),
        speed_mps: speed,
        tick: state.tick + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedPolicy {
    pub target_kmh: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance_kmh: f64,
}

fn default_tolerance() -> f64 {
    11.0
}

impl SpeedPolicy {
    pub fn new(target_kmh: f64) -> Self {
        Self { target_kmh, tolerance_kmh: default_tolerance() }
    }

    pub fn is_valid(&self) -> bool {
        self.tolerance_kmh >= 0.0 && self.target_kmh > self.tolerance_kmh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedAlarm {
    TooSlow,
    InRange,
    TooFast,
}

/// Band boundaries count as in range.
pub fn classify_speed(speed_kmh: f64, policy: &SpeedPolicy) -> SpeedAlarm {
    if speed_kmh < policy.target_kmh - policy.tolerance_kmh {
        SpeedAlarm::TooSlow
    } else if speed_kmh <= policy.target_kmh + policy.tolerance_kmh {
        SpeedAlarm::InRange
    } else {
        SpeedAlarm::TooFast
    }
}

/// Signed distance of the vehicle center from a lane center, positive left.
pub fn lateral_deviation(course: &Course, state: &VehicleState, lane: u32) -> Result<f64, VehicleError> {
    let pose = course.project_to_path(state.position)?;
    Ok(pose.lateral_m - course.lane_center_offset(lane))
}

/// As [`lateral_deviation`], seeded with a nearby arc length; also returns the pose.
pub fn lateral_deviation_near(
    course: &Course,
    state: &VehicleState,
    lane: u32,
    s_hint: f64,
) -> Result<(PathPose, f64), VehicleError> {
    let pose = course.project_near(state.position, s_hint)?;
    Ok((pose, pose.lateral_m - course.lane_center_offset(lane)))
}
