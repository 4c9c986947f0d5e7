//! Rough pointing: finger ray construction, angle calibration and
//! minimum-angle object resolution.
//!
//! Hand samples live in the cabin frame: `x` right, `y` up, `z` forward,
//! metres from the cabin origin. Yaw is the rotation about `y` (positive
//! toward the right), pitch the elevation above the `x`/`z` plane.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detmath;
use crate::geom::Vec3;
use crate::vehicle::VehicleState;
use crate::world::{Building, BuildingId, PathPose, Scene};

/// Height of the cabin origin above the vehicle reference point.
pub const CABIN_HEIGHT_M: f64 = 1.2;

/// Ties within this angular band are broken by distance, then id.
pub const ANGLE_TIE_RAD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PointingError {
    #[error("degenerate hand sample: fingertip and joint coincide or are non-finite")]
    DegenerateHand,
    #[error("ill-conditioned calibration: {0}")]
    IllConditioned(String),
    #[error("direction is vertical; yaw is undefined")]
    DegenerateDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandSample {
    /// Index fingertip.
    pub tip: Vec3,
    /// Third joint counted from the fingertip.
    pub joint3: Vec3,
    #[serde(default)]
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

/// Original ray from the third joint through the fingertip, rooted at the tip.
pub fn build_original_ray(hand: &HandSample) -> Result<Ray, PointingError> {
    if !(hand.tip.is_finite() && hand.joint3.is_finite()) {
        return Err(PointingError::DegenerateHand);
    }
    let dir = (hand.tip - hand.joint3).normalized().ok_or(PointingError::DegenerateHand)?;
    Ok(Ray { origin: hand.tip, dir })
}

/// Yaw and pitch of a cabin-frame direction.
pub fn yaw_pitch(dir: Vec3) -> Result<(f64, f64), PointingError> {
    let horiz = detmath::hypot(dir.x, dir.z);
    if horiz < 1e-9 * dir.norm().max(1e-300) || !dir.is_finite() {
        return Err(PointingError::DegenerateDirection);
    }
    Ok((detmath::atan2(dir.x, dir.z), detmath::atan2(dir.y, horiz)))
}

/// Unit cabin-frame direction for a yaw/pitch pair.
pub fn dir_from_yaw_pitch(yaw: f64, pitch: f64) -> Vec3 {
    let cp = detmath::cos(pitch);
    Vec3::new(cp * detmath::sin(yaw), detmath::sin(pitch), cp * detmath::cos(yaw))
}

/// Per-axis affine map from sensed to true pointing angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub yaw_gain: f64,
    pub yaw_offset_rad: f64,
    pub pitch_gain: f64,
    pub pitch_offset_rad: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Calibration {
    pub const IDENTITY: Calibration =
        Calibration { yaw_gain: 1.0, yaw_offset_rad: 0.0, pitch_gain: 1.0, pitch_offset_rad: 0.0 };

    pub fn is_valid(&self) -> bool {
        self.yaw_gain > 0.0
            && self.pitch_gain > 0.0
            && self.yaw_offset_rad.is_finite()
            && self.pitch_offset_rad.is_finite()
    }

    /// Parameters of the inverse map.
    pub fn inverse(&self) -> Calibration {
        Calibration {
            yaw_gain: 1.0 / self.yaw_gain,
            yaw_offset_rad: -self.yaw_offset_rad / self.yaw_gain,
            pitch_gain: 1.0 / self.pitch_gain,
            pitch_offset_rad: -self.pitch_offset_rad / self.pitch_gain,
        }
    }
}

/// Maps the ray direction through the calibration; the origin is kept.
pub fn apply_calibration(cal: &Calibration, ray: &Ray) -> Result<Ray, PointingError> {
    let (yaw, pitch) = yaw_pitch(ray.dir)?;
    let dir = dir_from_yaw_pitch(
        cal.yaw_gain * yaw + cal.yaw_offset_rad,
        cal.pitch_gain * pitch + cal.pitch_offset_rad,
    );
    Ok(Ray { origin: ray.origin, dir })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub calibration: Calibration,
    /// RMS of the fit residuals over both axes.
    pub residual_rms_rad: f64,
}

/// Minimum angular span of the calibration targets on each axis.
pub const MIN_CALIBRATION_SPAN_RAD: f64 = 10.0 * std::f64::consts::PI / 180.0;

/// Least-squares fit of true yaw/pitch against sensed yaw/pitch.
pub fn fit_calibration(pairs: &[(HandSample, Vec3)]) -> Result<CalibrationFit, PointingError> {
    if pairs.len() < 4 {
        return Err(PointingError::IllConditioned(format!("need >= 4 pairs, got {}", pairs.len())));
    }
    let mut sensed = Vec::with_capacity(pairs.len());
    let mut truth = Vec::with_capacity(pairs.len());
    for (hand, true_dir) in pairs {
        sensed.push(yaw_pitch(build_original_ray(hand)?.dir)?);
        truth.push(yaw_pitch(*true_dir)?);
    }
    let fit_axis = |m: &[f64], t: &[f64], name: &str| -> Result<(f64, f64, f64), PointingError> {
        let span = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - m.iter().cloned().fold(f64::INFINITY, f64::min);
        if span < MIN_CALIBRATION_SPAN_RAD {
            return Err(PointingError::IllConditioned(format!(
                "{name} span {:.2} deg below 10 deg",
                span.to_degrees()
            )));
        }
        let n = m.len() as f64;
        let mm = m.iter().sum::<f64>() / n;
        let mt = t.iter().sum::<f64>() / n;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (x, y) in m.iter().zip(t) {
            sxx += (x - mm) * (x - mm);
            sxy += (x - mm) * (y - mt);
        }
        let gain = sxy / sxx;
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(PointingError::IllConditioned(format!("{name} gain {gain} is not positive")));
        }
        let offset = mt - gain * mm;
        let sse: f64 = m.iter().zip(t).map(|(x, y)| (gain * x + offset - y).powi(2)).sum();
        Ok((gain, offset, sse))
    };
    let (my, mp): (Vec<f64>, Vec<f64>) = sensed.into_iter().unzip();
    let (ty, tp): (Vec<f64>, Vec<f64>) = truth.into_iter().unzip();
    let (yaw_gain, yaw_offset_rad, sse_y) = fit_axis(&my, &ty, "yaw")?;
    let (pitch_gain, pitch_offset_rad, sse_p) = fit_axis(&mp, &tp, "pitch")?;
    Ok(CalibrationFit {
        calibration: Calibration { yaw_gain, yaw_offset_rad, pitch_gain, pitch_offset_rad },
        residual_rms_rad: detmath::sqrt((sse_y + sse_p) / (2 * pairs.len()) as f64),
    })
}

/// Cabin frame attached to a vehicle state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CabinFrame {
    pub origin: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
}

impl CabinFrame {
    pub fn of(state: &VehicleState) -> Self {
        let (s, c) = (detmath::sin(state.heading_rad), detmath::cos(state.heading_rad));
        CabinFrame {
            origin: state.position + Vec3::new(0.0, 0.0, CABIN_HEIGHT_M),
            right: Vec3::new(s, -c, 0.0),
            up: Vec3::new(0.0, 0.0, 1.0),
            forward: Vec3::new(c, s, 0.0),
        }
    }

    pub fn dir_to_world(&self, d: Vec3) -> Vec3 {
        self.right * d.x + self.up * d.y + self.forward * d.z
    }

    pub fn point_to_world(&self, p: Vec3) -> Vec3 {
        self.origin + self.dir_to_world(p)
    }

    pub fn dir_to_cabin(&self, d: Vec3) -> Vec3 {
        Vec3::new(d.dot(self.right), d.dot(self.up), d.dot(self.forward))
    }

    pub fn point_to_cabin(&self, p: Vec3) -> Vec3 {
        self.dir_to_cabin(p - self.origin)
    }

    pub fn ray_to_world(&self, r: &Ray) -> Ray {
        Ray { origin: self.point_to_world(r.origin), dir: self.dir_to_world(r.dir) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolveParams {
    pub range_m: f64,
    pub max_angle_rad: f64,
    pub forward_only: bool,
}

impl Default for ResolveParams {
    fn default() -> Self {
        Self { range_m: 150.0, max_angle_rad: 0.52, forward_only: true }
    }
}

impl ResolveParams {
    pub fn is_valid(&self) -> bool {
        self.range_m > 0.0 && self.max_angle_rad > 0.0 && self.max_angle_rad <= std::f64::consts::PI
    }
}

/// Resolved candidate with the quantities used to pick it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub id: BuildingId,
    pub angle_rad: f64,
    pub distance_m: f64,
}

/// Minimum-angle resolution over an arbitrary building set.
///
/// `origin_s` is the arc length of the ray origin, used by the forward-only
/// filter.
pub fn resolve_among<'a, I>(ray: &Ray, buildings: I, origin_s: f64, params: &ResolveParams) -> Option<Resolution>
where
    I: IntoIterator<Item = &'a Building>,
{
    let mut best: Option<Resolution> = None;
    for b in buildings {
        if params.forward_only && !(b.s_m > origin_s) {
            continue;
        }
        let to = b.center_world - ray.origin;
        let distance_m = to.norm();
        if !(distance_m <= params.range_m) || distance_m == 0.0 {
            continue;
        }
        let cand = Resolution { id: b.id, angle_rad: ray.dir.angle_to(to), distance_m };
        let better = match &best {
            None => true,
            Some(cur) => {
                if cand.angle_rad < cur.angle_rad - ANGLE_TIE_RAD {
                    true
                } else if (cand.angle_rad - cur.angle_rad).abs() <= ANGLE_TIE_RAD {
                    cand.distance_m < cur.distance_m
                        || (cand.distance_m == cur.distance_m && cand.id < cur.id)
                } else {
                    false
                }
            }
        };
        if better {
            best = Some(cand);
        }
    }
    best.filter(|r| r.angle_rad <= params.max_angle_rad)
}

/// Building the world-frame ray points at, if any.
pub fn resolve_candidate(
    ray: &Ray,
    scene: &Scene,
    vehicle_pose: &PathPose,
    params: &ResolveParams,
) -> Option<BuildingId> {
    resolve_among(ray, &scene.buildings, vehicle_pose.s_m, params).map(|r| r.id)
}
