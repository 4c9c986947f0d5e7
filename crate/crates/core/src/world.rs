//! Procedural course and roadside scene, plus path geometry queries.
//!
//! The course is a chain of cubic Bézier segments in the `z = 0` plane that
//! alternates straight runs with circular-arc approximations. Consecutive
//! segments share endpoints and tangent directions. Arc length is resolved
//! through a table sampled every [`ARC_TABLE_STEP_M`] and refined with a
//! Newton step on Gauss-Legendre quadrature, so `path_point(s)` is accurate
//! to well below a millimetre.
//!
//! Lateral offsets are measured from the road centerline, positive to the
//! left of the direction of travel. Lanes are numbered from the right road
//! edge starting at 1; lane 1 is the driving reference line.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detmath;
use crate::geom::Vec3;
use crate::rng::{streams, StreamRng};

/// Spacing of the arc-length lookup table.
pub const ARC_TABLE_STEP_M: f64 = 0.25;
/// Spacing of the coarse samples used to seed global projection.
const COARSE_STEP_M: f64 = 1.0;
/// Maximum distance from the centerline accepted by projection queries.
pub const CORRIDOR_M: f64 = 200.0;
/// Current `scenario.json` schema version.
pub const SCENARIO_VERSION: u32 = 1;
pub const SCENARIO_FORMAT: &str = "pointselect-scenario";

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("arc length {s} outside [0, {total}]")]
    OutOfRange { s: f64, total: f64 },
    #[error("position is {distance:.1} m from the path, beyond the {CORRIDOR_M} m corridor")]
    OutOfCorridor { distance: f64 },
    #[error("course length {length:.1} m is shorter than the required {required:.1} m")]
    CourseTooShort { length: f64, required: f64 },
    #[error("scenario document: {0}")]
    Document(String),
}

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

impl From<[f64; 2]> for Interval {
    fn from(a: [f64; 2]) -> Self {
        Interval::new(a[0], a[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CourseParams {
    pub lane_width_m: f64,
    pub lane_count: u32,
    pub total_length_m: f64,
    pub segment_length_range_m: Interval,
    pub max_curvature_per_m: f64,
    pub straight_fraction: f64,
}

impl Default for CourseParams {
    fn default() -> Self {
        Self {
            lane_width_m: 3.3,
            lane_count: 2,
            total_length_m: 7000.0,
            segment_length_range_m: Interval::new(80.0, 250.0),
            max_curvature_per_m: 1.0 / 200.0,
            straight_fraction: 0.5,
        }
    }
}

impl CourseParams {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: &str| Err(WorldError::InvalidParams(m.to_string()));
        if !(self.lane_width_m > 0.0 && self.lane_width_m.is_finite()) {
            return bad("lane_width_m must be > 0");
        }
        if self.lane_count < 1 {
            return bad("lane_count must be >= 1");
        }
        if !(self.total_length_m > 0.0 && self.total_length_m.is_finite()) {
            return bad("total_length_m must be > 0");
        }
        if !self.segment_length_range_m.is_valid() || self.segment_length_range_m.lo <= 0.0 {
            return bad("segment_length_range_m must be a positive interval with lo <= hi");
        }
        if !(0.0..=1.0).contains(&self.straight_fraction) {
            return bad("straight_fraction must lie in [0, 1]");
        }
        if !(self.max_curvature_per_m >= 0.0 && self.max_curvature_per_m.is_finite()) {
            return bad("max_curvature_per_m must be >= 0");
        }
        if self.max_curvature_per_m == 0.0 && self.straight_fraction < 1.0 {
            return Err(WorldError::Infeasible(
                "max_curvature_per_m = 0 admits no curved sections but straight_fraction < 1"
                    .into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CubicBezier {
    pub p: [Vec3; 4],
}

impl CubicBezier {
    pub fn eval(&self, t: f64) -> Vec3 {
        let [p0, p1, p2, p3] = self.p;
        let mt = 1.0 - t;
        p0 * (mt * mt * mt) + p1 * (3.0 * mt * mt * t) + p2 * (3.0 * mt * t * t) + p3 * (t * t * t)
    }

    pub fn deriv(&self, t: f64) -> Vec3 {
        let [p0, p1, p2, p3] = self.p;
        let mt = 1.0 - t;
        (p1 - p0) * (3.0 * mt * mt) + (p2 - p1) * (6.0 * mt * t) + (p3 - p2) * (3.0 * t * t)
    }

    pub fn deriv2(&self, t: f64) -> Vec3 {
        let [p0, p1, p2, p3] = self.p;
        (p2 - p1 * 2.0 + p0) * (6.0 * (1.0 - t)) + (p3 - p2 * 2.0 + p1) * (6.0 * t)
    }

    /// Unsigned curvature in the ground plane.
    pub fn curvature(&self, t: f64) -> f64 {
        let d = self.deriv(t);
        let dd = self.deriv2(t);
        let speed = detmath::hypot(d.x, d.y);
        (d.x * dd.y - d.y * dd.x).abs() / (speed * speed * speed)
    }

    fn speed(&self, t: f64) -> f64 {
        let d = self.deriv(t);
        detmath::hypot(d.x, d.y)
    }

    /// Arc length between two parameters with 5-point Gauss-Legendre.
    fn arc_gl5(&self, t0: f64, t1: f64) -> f64 {
        let half = 0.5 * (t1 - t0);
        let mid = 0.5 * (t1 + t0);
        let mut acc = 0.0;
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            acc += w * self.speed(mid + half * x);
        }
        acc * half
    }

    fn length(&self) -> f64 {
        const PIECES: usize = 64;
        (0..PIECES)
            .map(|i| self.arc_gl5(i as f64 / PIECES as f64, (i + 1) as f64 / PIECES as f64))
            .sum()
    }

    /// Parameter at arc length `ds` past `t0` (Newton on the quadrature).
    fn advance(&self, t0: f64, ds: f64) -> f64 {
        if ds <= 0.0 {
            return t0;
        }
        let mut t = (t0 + ds / self.speed(t0).max(1e-12)).min(1.0);
        for _ in 0..12 {
            let f = self.arc_gl5(t0, t) - ds;
            if f.abs() < 1e-11 {
                break;
            }
            t = (t - f / self.speed(t).max(1e-12)).clamp(t0, 1.0);
        }
        t
    }

    fn straight(start: Vec3, dir: Vec3, len: f64) -> Self {
        Self {
            p: [start, start + dir * (len / 3.0), start + dir * (2.0 * len / 3.0), start + dir * len],
        }
    }

    /// Cubic approximation of a circular arc turning `sign * angle` radians.
    fn arc(start: Vec3, dir: Vec3, radius: f64, angle: f64, sign: f64) -> Self {
        let normal = dir.left_normal_2d() * sign;
        let center = start + normal * radius;
        let rot = |v: Vec3, a: f64| {
            let (s, c) = (detmath::sin(a), detmath::cos(a));
            Vec3::new(v.x * c - v.y * s, v.x * s + v.y * c, 0.0)
        };
        let end = center + rot(start - center, sign * angle);
        let end_dir = rot(dir, sign * angle);
        let k = 4.0 / 3.0 * detmath::tan(angle / 4.0) * radius;
        Self { p: [start, start + dir * k, end - end_dir * k, end] }
    }
}

/// Pose of a point relative to the course.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPose {
    pub s_m: f64,
    /// Signed offset from the road centerline, positive to the left.
    pub lateral_m: f64,
    pub path_heading_rad: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CourseDoc {
    lane_width_m: f64,
    lane_count: u32,
    segments: Vec<CubicBezier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CourseDoc", try_from = "CourseDoc")]
pub struct Course {
    pub segments: Vec<CubicBezier>,
    pub lane_width_m: f64,
    pub lane_count: u32,
    pub total_length_m: f64,
    seg_start_s: Vec<f64>,
    /// Global parameter `segment + t` at `s = k * ARC_TABLE_STEP_M`.
    arc_table: Vec<f64>,
    coarse: Vec<Vec3>,
}

impl From<Course> for CourseDoc {
    fn from(c: Course) -> Self {
        CourseDoc { lane_width_m: c.lane_width_m, lane_count: c.lane_count, segments: c.segments }
    }
}

impl TryFrom<CourseDoc> for Course {
    type Error = WorldError;
    fn try_from(d: CourseDoc) -> Result<Self, WorldError> {
        Course::from_segments(d.segments, d.lane_width_m, d.lane_count)
    }
}

impl Course {
    pub fn from_segments(
        segments: Vec<CubicBezier>,
        lane_width_m: f64,
        lane_count: u32,
    ) -> Result<Self, WorldError> {
        if segments.is_empty() {
            return Err(WorldError::InvalidParams("course has no segments".into()));
        }
        if segments.iter().any(|s| s.p.iter().any(|p| !p.is_finite())) {
            return Err(WorldError::InvalidParams("non-finite control point".into()));
        }
        let lengths: Vec<f64> = segments.iter().map(CubicBezier::length).collect();
        if lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(WorldError::InvalidParams("degenerate zero-length segment".into()));
        }
        let mut seg_start_s = Vec::with_capacity(segments.len());
        let mut acc = 0.0;
        for l in &lengths {
            seg_start_s.push(acc);
            acc += l;
        }
        let total = acc;

        let n_entries = (total / ARC_TABLE_STEP_M).floor() as usize + 1;
        let mut arc_table = Vec::with_capacity(n_entries);
        let mut seg = 0usize;
        let mut t = 0.0;
        let mut s_at_t = 0.0;
        for k in 0..n_entries {
            let s = k as f64 * ARC_TABLE_STEP_M;
            while seg + 1 < segments.len() && s >= seg_start_s[seg + 1] {
                seg += 1;
                t = 0.0;
                s_at_t = seg_start_s[seg];
            }
            t = segments[seg].advance(t, s - s_at_t);
            s_at_t = s;
            arc_table.push(seg as f64 + t);
        }

        let mut course = Course {
            segments,
            lane_width_m,
            lane_count,
            total_length_m: total,
            seg_start_s,
            arc_table,
            coarse: Vec::new(),
        };
        let n_coarse = (total / COARSE_STEP_M).floor() as usize;
        let mut coarse = Vec::with_capacity(n_coarse + 2);
        for j in 0..=n_coarse {
            coarse.push(course.point_unchecked(j as f64 * COARSE_STEP_M).0);
        }
        coarse.push(course.point_unchecked(total).0);
        course.coarse = coarse;
        Ok(course)
    }

    pub fn arc_table(&self) -> &[f64] {
        &self.arc_table
    }

    pub fn segment_start_s(&self) -> &[f64] {
        &self.seg_start_s
    }

    pub fn road_half_width_m(&self) -> f64 {
        self.lane_count as f64 * self.lane_width_m / 2.0
    }

    /// Centerline offset of a lane center; lanes count from the right edge, 1-based.
    pub fn lane_center_offset(&self, lane: u32) -> f64 {
        -self.road_half_width_m() + (lane as f64 - 0.5) * self.lane_width_m
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let n = self.segments.len();
        let seg = self.seg_start_s.partition_point(|&a| a <= s).saturating_sub(1).min(n - 1);
        let k = ((s / ARC_TABLE_STEP_M).floor() as usize).min(self.arc_table.len() - 1);
        let u = self.arc_table[k];
        let useg = (u.floor() as usize).min(n - 1);
        let (t0, s0) = if useg == seg {
            (u - seg as f64, k as f64 * ARC_TABLE_STEP_M)
        } else {
            (0.0, self.seg_start_s[seg])
        };
        let t = self.segments[seg].advance(t0, s - s0);
        (seg, t)
    }

    fn point_unchecked(&self, s: f64) -> (Vec3, Vec3) {
        let (seg, t) = self.locate(s);
        let b = &self.segments[seg];
        let d = b.deriv(t);
        let tangent = Vec3::new(d.x, d.y, 0.0)
            .normalized()
            .unwrap_or(Vec3::new(1.0, 0.0, 0.0));
        (b.eval(t), tangent)
    }

    /// Centerline position and unit tangent at arc length `s_m`.
    pub fn path_point(&self, s_m: f64) -> Result<(Vec3, Vec3), WorldError> {
        const EPS: f64 = 1e-9;
        if !(s_m >= -EPS && s_m <= self.total_length_m + EPS) {
            return Err(WorldError::OutOfRange { s: s_m, total: self.total_length_m });
        }
        Ok(self.point_unchecked(s_m.clamp(0.0, self.total_length_m)))
    }

    /// Curvature at arc length `s_m` (unsigned).
    pub fn curvature_at(&self, s_m: f64) -> f64 {
        let (seg, t) = self.locate(s_m.clamp(0.0, self.total_length_m));
        self.segments[seg].curvature(t)
    }

    /// Largest curvature over `samples` parameter points per segment.
    pub fn max_curvature(&self, samples: usize) -> f64 {
        self.segments
            .iter()
            .flat_map(|b| (0..=samples).map(move |i| b.curvature(i as f64 / samples as f64)))
            .fold(0.0, f64::max)
    }

    fn pose_at(&self, s: f64, p: Vec3) -> (PathPose, f64) {
        let (q, tan) = self.point_unchecked(s);
        let d = Vec3::new(p.x - q.x, p.y - q.y, 0.0);
        let pose = PathPose {
            s_m: s,
            lateral_m: d.dot(tan.left_normal_2d()),
            path_heading_rad: detmath::atan2(tan.y, tan.x),
        };
        (pose, detmath::hypot(d.x, d.y))
    }

    fn dist_sq_at(&self, s: f64, p: Vec3) -> f64 {
        let q = self.point_unchecked(s).0;
        let (dx, dy) = (p.x - q.x, p.y - q.y);
        dx * dx + dy * dy
    }

    /// Closest centerline point to `position` (ground-plane distance).
    pub fn project_to_path(&self, position: Vec3) -> Result<PathPose, WorldError> {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (j, q) in self.coarse.iter().enumerate() {
            let (dx, dy) = (position.x - q.x, position.y - q.y);
            let d = dx * dx + dy * dy;
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        if best_d.sqrt() > CORRIDOR_M + 2.0 * COARSE_STEP_M {
            return Err(WorldError::OutOfCorridor { distance: best_d.sqrt() });
        }
        let s_best = (best as f64 * COARSE_STEP_M).min(self.total_length_m);
        let mut a = (s_best - COARSE_STEP_M).max(0.0);
        let mut b = (s_best + COARSE_STEP_M).min(self.total_length_m);
        // golden-section search on the bracket
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = self.dist_sq_at(c, position);
        let mut fd = self.dist_sq_at(d, position);
        while b - a > 1e-6 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = self.dist_sq_at(c, position);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = self.dist_sq_at(d, position);
            }
        }
        let (pose, dist) = self.pose_at(0.5 * (a + b), position);
        if dist > CORRIDOR_M {
            return Err(WorldError::OutOfCorridor { distance: dist });
        }
        Ok(pose)
    }

    /// Projection seeded by a nearby arc length; falls back to the global
    /// search when the local iteration does not settle.
    pub fn project_near(&self, position: Vec3, s_hint: f64) -> Result<PathPose, WorldError> {
        let mut s = s_hint.clamp(0.0, self.total_length_m);
        for _ in 0..16 {
            let (q, tan) = self.point_unchecked(s);
            let step = (position.x - q.x) * tan.x + (position.y - q.y) * tan.y;
            let next = (s + step).clamp(0.0, self.total_length_m);
            if (next - s).abs() < 1e-7 {
                let (pose, dist) = self.pose_at(next, position);
                if dist > CORRIDOR_M {
                    return Err(WorldError::OutOfCorridor { distance: dist });
                }
                if (next - s_hint).abs() <= 60.0 {
                    return Ok(pose);
                }
                break;
            }
            s = next;
        }
        self.project_to_path(position)
    }
}

/// Generates a course of straight runs and bounded-curvature arcs.
///
/// Heading stays within ±90° of the start direction so the course never
/// folds back on itself.
pub fn generate_course(seed: u64, params: &CourseParams) -> Result<Course, WorldError> {
    params.validate()?;
    let mut rng = StreamRng::substream(seed, streams::COURSE);
    let range = params.segment_length_range_m;
    let mut segments = Vec::new();
    let mut pos = Vec3::ZERO;
    let mut heading = 0.0f64;
    let mut acc = 0.0;
    while params.total_length_m - acc > 1e-6 {
        let requested = rng.uniform(range.lo, range.hi).min(params.total_length_m - acc);
        let straight = rng.next_f64() < params.straight_fraction;
        let dir = Vec3::new(detmath::cos(heading), detmath::sin(heading), 0.0);
        // Consumed unconditionally so curved/straight choices do not shift the stream.
        let radius_draw = rng.next_f64();
        let sign_draw = rng.next_f64();
        if straight {
            segments.push(CubicBezier::straight(pos, dir, requested));
            pos = segments.last().unwrap().p[3];
            acc += requested;
            continue;
        }
        let r_min = 1.0 / params.max_curvature_per_m;
        let mut radius = r_min * (1.05 + 1.95 * radius_draw);
        let angle = (requested / radius).min(FRAC_PI_2);
        let mut sign = if sign_draw < 0.5 { 1.0 } else { -1.0 };
        if (heading + sign * angle).abs() > FRAC_PI_2 {
            sign = -sign;
        }
        let mut seg = CubicBezier::arc(pos, dir, radius, angle, sign);
        // Bézier arcs overshoot the circle's curvature slightly; widen until bounded.
        let limit = params.max_curvature_per_m;
        while (0..=64).any(|i| seg.curvature(i as f64 / 64.0) > limit) {
            radius *= 1.02;
            seg = CubicBezier::arc(pos, dir, radius, angle, sign);
        }
        segments.push(seg);
        pos = seg.p[3];
        heading += sign * angle;
        acc += radius * angle;
    }
    Course::from_segments(segments, params.lane_width_m, params.lane_count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub building_min_m: Vec3,
    pub building_max_m: Vec3,
    pub setback_range_m: Interval,
    pub gap_range_m: Interval,
    pub color_count: u32,
    pub start_offset_m: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            building_min_m: Vec3::new(10.0, 10.0, 8.0),
            building_max_m: Vec3::new(20.0, 20.0, 15.0),
            setback_range_m: Interval::new(5.0, 8.0),
            gap_range_m: Interval::new(10.0, 30.0),
            color_count: 10,
            start_offset_m: 100.0,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: &str| Err(WorldError::InvalidParams(m.to_string()));
        let (mn, mx) = (self.building_min_m, self.building_max_m);
        if !(mn.is_finite() && mx.is_finite()) || mn.x <= 0.0 || mn.y <= 0.0 || mn.z <= 0.0 {
            return bad("building sizes must be positive and finite");
        }
        if mn.x > mx.x || mn.y > mx.y || mn.z > mx.z {
            return bad("building_min_m must be <= building_max_m componentwise");
        }
        if !self.setback_range_m.is_valid() || self.setback_range_m.lo < 0.0 {
            return bad("setback_range_m must be a non-negative interval with lo <= hi");
        }
        if !self.gap_range_m.is_valid() || self.gap_range_m.lo < 0.0 {
            return bad("gap_range_m must be a non-negative interval with lo <= hi");
        }
        if self.color_count < 1 {
            return bad("color_count must be >= 1");
        }
        if !(self.start_offset_m >= 0.0 && self.start_offset_m.is_finite()) {
            return bad("start_offset_m must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

pub type BuildingId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: BuildingId,
    /// Arc length of the footprint center along the centerline.
    pub s_m: f64,
    pub side: Side,
    pub setback_m: f64,
    /// Width along the road, depth away from it, height.
    pub size_m: Vec3,
    pub color_index: u32,
    pub center_world: Vec3,
}

/// World position of a footprint center placed beside the road.
pub fn building_center(
    course: &Course,
    s_m: f64,
    side: Side,
    setback_m: f64,
    size_m: Vec3,
) -> Result<Vec3, WorldError> {
    let (pos, tan) = course.path_point(s_m)?;
    let offset = course.road_half_width_m() + setback_m + size_m.y / 2.0;
    Ok(pos + tan.left_normal_2d() * (side.sign() * offset) + Vec3::new(0.0, 0.0, size_m.z / 2.0))
}

impl Building {
    /// Ground-plane footprint corners, counter-clockwise.
    pub fn footprint(&self, course: &Course) -> [Vec3; 4] {
        let (_, tan) = course.point_unchecked(self.s_m.clamp(0.0, course.total_length_m));
        let n = tan.left_normal_2d();
        let c = Vec3::new(self.center_world.x, self.center_world.y, 0.0);
        let (hw, hd) = (self.size_m.x / 2.0, self.size_m.y / 2.0);
        [c - tan * hw - n * hd, c + tan * hw - n * hd, c + tan * hw + n * hd, c - tan * hw + n * hd]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub course: Course,
    /// Sorted by `s_m`; `buildings[i].id == i`.
    pub buildings: Vec<Building>,
}

impl Scene {
    pub fn building(&self, id: BuildingId) -> Option<&Building> {
        self.buildings.get(id as usize).filter(|b| b.id == id)
    }

    /// Ids with `s_m` in `[lo, hi]`, ascending by `s_m`.
    pub fn ids_in_window(&self, lo: f64, hi: f64) -> Vec<BuildingId> {
        let start = self.buildings.partition_point(|b| b.s_m < lo);
        self.buildings[start..]
            .iter()
            .take_while(|b| b.s_m <= hi)
            .map(|b| b.id)
            .collect()
    }
}

pub fn generate_scene(seed: u64, course: &Course, params: &SceneParams) -> Result<Scene, WorldError> {
    params.validate()?;
    let required = params.start_offset_m + params.gap_range_m.hi;
    if course.total_length_m < required {
        return Err(WorldError::CourseTooShort { length: course.total_length_m, required });
    }
    let mut rng = StreamRng::substream(seed, streams::SCENE);
    let (mn, mx) = (params.building_min_m, params.building_max_m);
    let mut placed = Vec::new();
    for side in [Side::Left, Side::Right] {
        let mut edge = params.start_offset_m;
        loop {
            let size = Vec3::new(rng.uniform(mn.x, mx.x), rng.uniform(mn.y, mx.y), rng.uniform(mn.z, mx.z));
            let setback = rng.uniform(params.setback_range_m.lo, params.setback_range_m.hi);
            let color_index = rng.below(u64::from(params.color_count)) as u32;
            let gap = rng.uniform(params.gap_range_m.lo, params.gap_range_m.hi);
            let s_m = edge + size.x / 2.0;
            if s_m + size.x / 2.0 > course.total_length_m {
                break;
            }
            let center_world = building_center(course, s_m, side, setback, size)?;
            placed.push(Building { id: 0, s_m, side, setback_m: setback, size_m: size, color_index, center_world });
            edge = s_m + size.x / 2.0 + gap;
        }
    }
    placed.sort_by(|a, b| a.s_m.total_cmp(&b.s_m).then(a.side.cmp(&b.side)));
    for (i, b) in placed.iter_mut().enumerate() {
        b.id = i as BuildingId;
    }
    Ok(Scene { course: course.clone(), buildings: placed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Size,
    Setback,
    Color,
    StartOffset,
    CourseRange,
    Gap,
    Placement,
    Roadway,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub building_ids: Vec<BuildingId>,
    pub measured: f64,
    pub detail: String,
}

/// Checks every building and same-side gap; empty result means valid.
pub fn validate_scene(scene: &Scene, params: &SceneParams) -> Vec<Violation> {
    const TOL: f64 = 1e-6;
    let course = &scene.course;
    let mut out = Vec::new();
    let mut push = |constraint, ids: Vec<BuildingId>, measured: f64, detail: String| {
        out.push(Violation { constraint, building_ids: ids, measured, detail })
    };
    let (mn, mx) = (params.building_min_m, params.building_max_m);
    for (i, b) in scene.buildings.iter().enumerate() {
        if b.id as usize != i {
            push(Constraint::Identity, vec![b.id], i as f64, "id does not match position".into());
        }
        for (axis, v, lo, hi) in [
            ("width", b.size_m.x, mn.x, mx.x),
            ("depth", b.size_m.y, mn.y, mx.y),
            ("height", b.size_m.z, mn.z, mx.z),
        ] {
            if !(v >= lo - TOL && v <= hi + TOL) {
                push(Constraint::Size, vec![b.id], v, format!("{axis} outside [{lo}, {hi}]"));
            }
        }
        if !params.setback_range_m.contains(b.setback_m, TOL) {
            push(Constraint::Setback, vec![b.id], b.setback_m, "setback outside range".into());
        }
        if b.color_index >= params.color_count {
            push(Constraint::Color, vec![b.id], b.color_index as f64, "color index out of palette".into());
        }
        if b.s_m < params.start_offset_m - TOL {
            push(Constraint::StartOffset, vec![b.id], b.s_m, "placed before the start offset".into());
        }
        if b.s_m - b.size_m.x / 2.0 < -TOL || b.s_m + b.size_m.x / 2.0 > course.total_length_m + TOL {
            push(Constraint::CourseRange, vec![b.id], b.s_m, "footprint extends past the course".into());
            continue;
        }
        match building_center(course, b.s_m, b.side, b.setback_m, b.size_m) {
            Ok(c) if c.distance(b.center_world) <= 1e-6 => {}
            Ok(c) => push(
                Constraint::Placement,
                vec![b.id],
                c.distance(b.center_world),
                "center inconsistent with s/side/setback".into(),
            ),
            Err(e) => push(Constraint::Placement, vec![b.id], b.s_m, e.to_string()),
        }
        let half_road = course.road_half_width_m();
        for corner in b.footprint(course) {
            match course.project_near(corner, b.s_m) {
                Ok(p) if p.lateral_m.abs() > half_road && p.lateral_m.signum() == b.side.sign() => {}
                Ok(p) => push(Constraint::Roadway, vec![b.id], p.lateral_m, "footprint reaches the roadway".into()),
                Err(e) => push(Constraint::Roadway, vec![b.id], f64::NAN, e.to_string()),
            }
        }
    }
    for side in [Side::Left, Side::Right] {
        let same: Vec<&Building> = scene.buildings.iter().filter(|b| b.side == side).collect();
        for pair in same.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let gap = (b.s_m - b.size_m.x / 2.0) - (a.s_m + a.size_m.x / 2.0);
            if !params.gap_range_m.contains(gap, TOL) {
                push(Constraint::Gap, vec![a.id, b.id], gap, "edge-to-edge gap outside range".into());
            }
        }
    }
    out
}

/// Self-describing scenario document (`scenario.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub course_params: CourseParams,
    pub scene_params: SceneParams,
    pub scene: Scene,
}

impl Scenario {
    pub fn generate(seed: u64, course_params: CourseParams, scene_params: SceneParams) -> Result<Self, WorldError> {
        let course = generate_course(seed, &course_params)?;
        let scene = generate_scene(seed, &course, &scene_params)?;
        Ok(Self {
            format: SCENARIO_FORMAT.into(),
            version: SCENARIO_VERSION,
            seed,
            course_params,
            scene_params,
            scene,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| WorldError::Document(e.to_string()))?;
        if s.format != SCENARIO_FORMAT || s.version != SCENARIO_VERSION {
            return Err(WorldError::Document(format!(
                "unsupported scenario {} v{}",
                s.format, s.version
            )));
        }
        Ok(s)
    }
}
