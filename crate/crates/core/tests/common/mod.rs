//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use pointselect::geom::Vec3;
use pointselect::harness::log::{LogHeader, StatePayload};
use pointselect::harness::{Event, EventLog, EventRecord, SessionConfig};
use pointselect::pointing::{Ray, ResolveParams};
use pointselect::session::{
    tick_task, Phase, SelectionEvent, TaskEvent, TaskParams, TaskRngs, TaskState,
};
use pointselect::vehicle::{Controls, SpeedAlarm, VehicleParams, VehicleState, DT_S};
use pointselect::world::{
    building_center, generate_course, Building, BuildingId, Course, CourseParams, PathPose, Scene, Side,
};

pub fn straight_course(length_m: f64) -> Course {
    generate_course(0, &CourseParams { straight_fraction: 1.0, total_length_m: length_m, ..Default::default() })
        .expect("straight course")
}

/// Straight course with 10 m cubes at the given arc lengths.
pub fn line_scene(left: &[f64], right: &[f64]) -> Scene {
    let course = straight_course(1000.0);
    let mut bs: Vec<(f64, Side)> = left.iter().map(|&s| (s, Side::Left)).collect();
    bs.extend(right.iter().map(|&s| (s, Side::Right)));
    bs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let size = Vec3::new(10.0, 10.0, 10.0);
    let buildings = bs
        .into_iter()
        .enumerate()
        .map(|(i, (s, side))| Building {
            id: i as BuildingId,
            s_m: s,
            side,
            setback_m: 6.0,
            size_m: size,
            color_index: 0,
            center_world: building_center(&course, s, side, 6.0, size).unwrap(),
        })
        .collect();
    Scene { course, buildings }
}

pub fn id_at(scene: &Scene, s: f64, side: Side) -> BuildingId {
    scene.buildings.iter().find(|b| b.s_m == s && b.side == side).expect("building").id
}

/// Filter then argmin over (angle, distance, id), computed with std math on
/// raw components.
pub fn brute_resolve(ray: &Ray, buildings: &[Building], origin_s: f64, p: &ResolveParams) -> Option<BuildingId> {
    let angle = |a: Vec3, b: Vec3| {
        let c = a.cross(b);
        let cn = (c.x * c.x + c.y * c.y + c.z * c.z).sqrt();
        cn.atan2(a.x * b.x + a.y * b.y + a.z * b.z)
    };
    let mut eligible: Vec<(f64, f64, BuildingId)> = buildings
        .iter()
        .filter(|b| !p.forward_only || b.s_m > origin_s)
        .filter_map(|b| {
            let to = b.center_world - ray.origin;
            let d = (to.x * to.x + to.y * to.y + to.z * to.z).sqrt();
            (d > 0.0 && d <= p.range_m).then(|| (angle(ray.dir, to), d, b.id))
        })
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let min_angle = eligible.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    eligible.retain(|e| e.0 - min_angle <= 1e-12);
    eligible.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.2.cmp(&b.2)));
    let best = eligible[0];
    (best.0 <= p.max_angle_rad).then_some(best.2)
}

/// Continuous bicycle model integrated with classic RK4 at `substeps` per
/// tick, controls held constant over each tick.
pub fn rk4_reference(
    start: &VehicleState,
    controls: &[Controls],
    params: &VehicleParams,
    dt: f64,
    substeps: usize,
) -> Vec<[f64; 4]> {
    let mut x = [start.position.x, start.position.y, start.heading_rad, start.speed_mps];
    let mut out = Vec::with_capacity(controls.len());
    let h = dt / substeps as f64;
    for c in controls {
        let steer = c.steer_rad.clamp(-params.max_steer_rad, params.max_steer_rad);
        let accel = c.accel_mps2.clamp(params.accel_range_mps2.lo, params.accel_range_mps2.hi);
        let f = |s: [f64; 4]| [s[3] * s[2].cos(), s[3] * s[2].sin(), s[3] / params.wheelbase_m * steer.tan(), accel];
        for _ in 0..substeps {
            let add = |a: [f64; 4], k: [f64; 4], w: f64| [a[0] + w * k[0], a[1] + w * k[1], a[2] + w * k[2], a[3] + w * k[3]];
            let k1 = f(x);
            let k2 = f(add(x, k1, h / 2.0));
            let k3 = f(add(x, k2, h / 2.0));
            let k4 = f(add(x, k3, h));
            for i in 0..4 {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        out.push(x);
    }
    out
}

/// 60 s maneuver: speed-up, slalom, a held turn and a braking turn.
pub fn reference_maneuver(dt: f64) -> Vec<Controls> {
    let n = (60.0 / dt).round() as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            let (steer, accel) = if t < 10.0 {
                (0.0, 1.0)
            } else if t < 35.0 {
                (0.08 * (2.0 * std::f64::consts::PI * t / 6.0).sin(), 0.0)
            } else if t < 50.0 {
                (0.1, 0.2)
            } else {
                (-0.05, -0.8)
            };
            Controls { steer_rad: steer, accel_mps2: accel }
        })
        .collect()
}

/// Double-double value `hi + lo`.
#[derive(Clone, Copy)]
struct Dd(f64, f64);

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd(s, (a - (s - bb)) + (b - bb))
}

fn dd_add(a: Dd, b: Dd) -> Dd {
    let s = two_sum(a.0, b.0);
    let t = two_sum(a.1, b.1);
    let hi = two_sum(s.0, s.1 + t.0);
    two_sum(hi.0, hi.1 + t.1)
}

fn dd_mul(a: Dd, b: Dd) -> Dd {
    let p = a.0 * b.0;
    let e = a.0.mul_add(b.0, -p);
    two_sum(p, e + a.0 * b.1 + a.1 * b.0)
}

fn dd_div_f(a: Dd, b: f64) -> Dd {
    let q1 = a.0 / b;
    let r = dd_add(a, dd_mul(Dd(-q1, 0.0), Dd(b, 0.0)));
    two_sum(q1, r.0 / b)
}

/// Two-pass sample SD carried out in double-double arithmetic.
pub fn dd_sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let sum = values.iter().fold(Dd(0.0, 0.0), |acc, &v| dd_add(acc, Dd(v, 0.0)));
    let mean = dd_div_f(sum, n);
    let ss = values.iter().fold(Dd(0.0, 0.0), |acc, &v| {
        let d = dd_add(Dd(v, 0.0), Dd(-mean.0, -mean.1));
        dd_add(acc, dd_mul(d, d))
    });
    let var = dd_div_f(ss, n - 1.0);
    (var.0 + var.1).sqrt()
}

/// Config for the reference driver and a noiseless pointer.
pub fn zero_noise_config(seed: u64, speed_kmh: f64, duration_s: f64) -> SessionConfig {
    let mut cfg = SessionConfig { seed, duration_s, ..Default::default() };
    cfg.speed = pointselect::vehicle::SpeedPolicy::new(speed_kmh);
    cfg.pointer.noise_deg = 0.0;
    cfg
}

/// Log of bare state records with the given deviation and speed series.
pub fn synthetic_state_log(deviation_m: &[f64], speed_kmh: &[f64]) -> EventLog {
    let mut log = EventLog::new(LogHeader::new(&SessionConfig::default(), "0".into()));
    for (i, (&d, &v)) in deviation_m.iter().zip(speed_kmh).enumerate() {
        let tick = i as u64 + 1;
        log.records.push(EventRecord {
            tick,
            t_s: tick as f64 * DT_S,
            event: Event::State(StatePayload {
                position: Vec3::ZERO,
                heading_rad: 0.0,
                speed_mps: v / 3.6,
                s_m: 0.0,
                lateral_m: d,
                deviation_m: d,
                alarm: SpeedAlarm::InRange,
                controls: Controls::default(),
                phase: Phase::Idle,
                target: None,
                chain: String::new(),
            }),
        });
    }
    log.finalize();
    log
}

/// Drives the task controller alone along a straight scene at constant speed.
pub struct TaskScript {
    pub scene: Scene,
    pub params: TaskParams,
    pub task: TaskState,
    pub rngs: TaskRngs,
    pub speed_mps: f64,
    pub tick: u64,
    pub log: Vec<(u64, TaskEvent)>,
}

impl TaskScript {
    /// Buildings every 30 m on both sides; the target is the right-side
    /// building at 200 m, assigned at tick 0.
    pub fn new(seed: u64) -> Self {
        let right: Vec<f64> = (0..27).map(|i| 110.0 + 30.0 * i as f64).collect();
        let left: Vec<f64> = (0..27).map(|i| 125.0 + 30.0 * i as f64).collect();
        let scene = line_scene(&left, &right);
        let target = id_at(&scene, 200.0, Side::Right);
        let task = TaskState { target_id: Some(target), assigned_tick: Some(0), last_target: Some(target), ..Default::default() };
        Self {
            scene,
            params: TaskParams::default(),
            task,
            rngs: TaskRngs::new(seed),
            speed_mps: 50.0 / 3.6,
            tick: 0,
            log: Vec::new(),
        }
    }

    pub fn target(&self) -> BuildingId {
        id_at(&self.scene, 200.0, Side::Right)
    }

    pub fn other(&self) -> BuildingId {
        id_at(&self.scene, 215.0, Side::Left)
    }

    pub fn pose_at(&self, tick: u64) -> PathPose {
        PathPose { s_m: self.speed_mps * tick as f64 * DT_S, lateral_m: -1.65, path_heading_rad: 0.0 }
    }

    /// First tick whose pose is strictly past the target center.
    pub fn pass_tick(&self) -> u64 {
        (0..).find(|&t| self.pose_at(t).s_m > 200.0).unwrap()
    }

    pub fn step(&mut self, events: &[SelectionEvent]) -> Vec<TaskEvent> {
        self.tick += 1;
        let pose = self.pose_at(self.tick);
        let (next, out) = tick_task(&self.task, events, &self.scene, &pose, self.tick, &mut self.rngs, &self.params);
        self.task = next;
        self.log.extend(out.iter().cloned().map(|e| (self.tick, e)));
        out
    }

    /// Steps with no selection events until `tick` has been processed.
    pub fn idle_until(&mut self, tick: u64) {
        while self.tick < tick {
            self.step(&[]);
        }
    }

    pub fn activate(&mut self, candidate: BuildingId) -> Vec<TaskEvent> {
        self.step(&[SelectionEvent::Activated { candidate, s_capture_m: self.pose_at(self.tick + 1).s_m }])
    }

    pub fn confirm(&mut self, candidate: BuildingId) -> Vec<TaskEvent> {
        self.step(&[SelectionEvent::Confirmed { candidate }])
    }

    pub fn outcomes(&self) -> Vec<(u64, pointselect::session::Outcome)> {
        self.log
            .iter()
            .filter_map(|(t, e)| match e {
                TaskEvent::Outcome { outcome, .. } => Some((*t, *outcome)),
                _ => None,
            })
            .collect()
    }
}

/// Curved scenes for randomized resolver cases.
pub fn resolver_scenes(count: u64) -> Vec<Scene> {
    let course = CourseParams { total_length_m: 1500.0, ..Default::default() };
    (0..count)
        .map(|seed| {
            pointselect::world::Scenario::generate(1000 + seed, course.clone(), Default::default())
                .expect("scenario")
                .scene
        })
        .collect()
}

pub struct ResolverCase {
    pub scene: usize,
    pub ray: Ray,
    pub pose: PathPose,
    pub params: ResolveParams,
}

/// Ray from a hand near the cabin: usually aimed at a nearby building with
/// angular error, sometimes in an arbitrary direction.
pub fn resolver_case(scenes: &[Scene], rng: &mut pointselect::rng::StreamRng) -> ResolverCase {
    use pointselect::pointing::{dir_from_yaw_pitch, yaw_pitch, CabinFrame};
    let idx = rng.below(scenes.len() as u64) as usize;
    let scene = &scenes[idx];
    let course = &scene.course;
    let s0 = rng.uniform(0.0, course.total_length_m - 200.0);
    let lateral = course.lane_center_offset(1) + rng.uniform(-0.8, 0.8);
    let mut vehicle = VehicleState::on_course(course, s0, lateral).unwrap();
    vehicle.heading_rad += rng.uniform(-0.1, 0.1);
    let pose = course.project_near(vehicle.position, s0).unwrap();
    let frame = CabinFrame::of(&vehicle);
    let origin = frame.point_to_world(Vec3::new(rng.uniform(0.0, 0.5), rng.uniform(-0.4, 0.0), rng.uniform(0.3, 0.7)));
    let window = scene.ids_in_window(s0 - 50.0, s0 + 200.0);
    let dir = if !window.is_empty() && rng.next_f64() < 0.8 {
        let b = &scene.buildings[window[rng.below(window.len() as u64) as usize] as usize];
        let (yaw, pitch) = yaw_pitch(frame.dir_to_cabin(b.center_world - origin)).unwrap();
        frame.dir_to_world(dir_from_yaw_pitch(yaw + rng.uniform(-0.4, 0.4), pitch + rng.uniform(-0.2, 0.2)))
    } else {
        dir_from_yaw_pitch(rng.uniform(-3.1, 3.1), rng.uniform(-1.4, 1.4))
    };
    let params = ResolveParams {
        range_m: rng.uniform(40.0, 250.0),
        max_angle_rad: rng.uniform(0.05, 1.2),
        forward_only: rng.next_f64() < 0.7,
    };
    ResolverCase { scene: idx, ray: Ray { origin, dir }, pose, params }
}
