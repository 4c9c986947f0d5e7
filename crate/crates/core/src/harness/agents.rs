//! Synthetic driver and pointer standing in for a human participant.

use crate::detmath;
use crate::geom::Vec3;
use crate::pointing::{dir_from_yaw_pitch, yaw_pitch, CabinFrame, Calibration, HandSample};
use crate::rng::{streams, StreamRng};
use crate::session::{arrow_path, Button, Phase};
use crate::vehicle::{Controls, VehicleParams, VehicleState, MPS_PER_KMH};
use crate::world::{BuildingId, Course, PathPose};

use super::config::{ticks, DriverParams, PointerParams, SessionConfig};
use super::sim::{Input, Simulation};

/// Pure-pursuit lane keeper with proportional speed control.
#[derive(Debug, Clone)]
pub struct DriverAgent {
    params: DriverParams,
    vehicle: VehicleParams,
    lane: u32,
    target_mps: f64,
}

impl DriverAgent {
    pub fn new(config: &SessionConfig) -> Self {
        Self {
            params: config.driver.clone(),
            vehicle: config.vehicle.clone(),
            lane: config.lane,
            target_mps: config.speed.target_kmh * MPS_PER_KMH,
        }
    }

    pub fn act(&mut self, sim: &Simulation) -> Controls {
        self.controls_for(&sim.scene().course, sim.vehicle(), sim.pose())
    }

    pub fn controls_for(&self, course: &Course, state: &VehicleState, pose: &PathPose) -> Controls {
        let lookahead = self.params.lookahead_min_m.max(self.params.lookahead_gain_s * state.speed_mps);
        let s_goal = (pose.s_m + lookahead).min(course.total_length_m);
        let steer = match course.path_point(s_goal) {
            Ok((p, tan)) => {
                let goal = p + tan.left_normal_2d() * course.lane_center_offset(self.lane);
                let d = goal - state.position;
                let (sh, ch) = (detmath::sin(state.heading_rad), detmath::cos(state.heading_rad));
                let lx = ch * d.x + sh * d.y;
                let ly = -sh * d.x + ch * d.y;
                let dist_sq = lx * lx + ly * ly;
                if dist_sq > 1e-9 {
                    detmath::atan(2.0 * self.vehicle.wheelbase_m * ly / dist_sq)
                } else {
                    0.0
                }
            }
            Err(_) => 0.0,
        };
        let accel = self.params.speed_gain_per_s * (self.target_mps - state.speed_mps);
        Controls { steer_rad: steer, accel_mps2: accel }.clamped(&self.vehicle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Plan {
    Point,
    Decide,
    Confirm,
}

/// Points at the assigned target with Gaussian angular noise, then corrects
/// the candidate with the shortest arrow route and confirms.
#[derive(Debug, Clone)]
pub struct PointerAgent {
    params: PointerParams,
    calibration: Calibration,
    rng: StreamRng,
    target: Option<BuildingId>,
    next_at: u64,
    plan: Plan,
    notice: u64,
    reaction: u64,
    arrow: u64,
    confirm: u64,
}

impl PointerAgent {
    pub fn new(config: &SessionConfig) -> Self {
        let p = &config.pointer;
        let dt = config.dt_s;
        Self {
            params: p.clone(),
            calibration: config.calibration,
            rng: StreamRng::substream(config.seed, streams::POINTER),
            target: None,
            next_at: 0,
            plan: Plan::Point,
            notice: ticks(p.notice_delay_s, dt),
            reaction: ticks(p.reaction_delay_s, dt),
            arrow: ticks(p.arrow_delay_s, dt),
            confirm: ticks(p.confirm_delay_s, dt),
        }
    }

    /// Appends this tick's actions to `out`.
    pub fn act(&mut self, sim: &Simulation, out: &mut Vec<Input>) {
        let tick = sim.tick() + 1;
        let task = sim.task();
        let phase = sim.selection().phase;
        if task.target_id != self.target {
            self.target = task.target_id;
            self.plan = Plan::Point;
            self.next_at = task.assigned_tick.unwrap_or(tick) + self.notice;
        }
        let Some(target) = self.target else {
            if phase == Phase::FineSelect {
                out.push(Input::Button(Button::Cancel));
            }
            return;
        };
        if tick < self.next_at {
            return;
        }
        match (phase, self.plan) {
            (Phase::Idle, _) => {
                if let Some(hand) = self.aim(sim, target) {
                    out.push(Input::Hand(hand));
                    out.push(Input::Button(Button::Activate));
                }
                self.plan = Plan::Decide;
                self.next_at = tick + self.reaction;
            }
            (Phase::FineSelect, Plan::Confirm) => {
                out.push(Input::Button(Button::Confirm));
                self.plan = Plan::Point;
                self.next_at = tick + self.reaction;
            }
            (Phase::FineSelect, _) => {
                let sel = sim.selection();
                if sel.candidate_id == Some(target) {
                    self.plan = Plan::Confirm;
                    self.next_at = tick + self.confirm;
                    if self.confirm == 0 {
                        out.push(Input::Button(Button::Confirm));
                        self.plan = Plan::Point;
                        self.next_at = tick + self.reaction;
                    }
                    return;
                }
                if self.misjudges(sim, sel.candidate_id, target) {
                    self.plan = Plan::Confirm;
                    self.next_at = tick + self.confirm;
                    return;
                }
                match arrow_path(sel, target, sim.scene(), &sim.config().nav) {
                    Some(path) if !path.is_empty() && path.len() <= self.params.max_arrows as usize => {
                        out.push(Input::Button(path[0].button()));
                        self.plan = Plan::Decide;
                        self.next_at = tick + self.arrow;
                    }
                    _ => {
                        out.push(Input::Button(Button::Cancel));
                        self.plan = Plan::Point;
                        self.next_at = tick + self.reaction;
                    }
                }
            }
        }
    }

    fn misjudges(&mut self, sim: &Simulation, candidate: Option<BuildingId>, target: BuildingId) -> bool {
        let sigma = self.params.noise_deg.to_radians();
        if !self.params.misjudge || sigma <= 0.0 {
            return false;
        }
        let scene = sim.scene();
        let (Some(c), Some(t)) = (candidate.and_then(|id| scene.building(id)), scene.building(target)) else {
            return false;
        };
        let eye = CabinFrame::of(sim.vehicle()).origin;
        let sep = (c.center_world - eye).angle_to(t.center_world - eye);
        self.rng.next_f64() < detmath::exp(-sep * sep / (2.0 * sigma * sigma))
    }

    /// Hand sample pointing at the target, or at the nearest building still
    /// ahead on its side once the target has been passed.
    fn aim(&mut self, sim: &Simulation, target: BuildingId) -> Option<HandSample> {
        let scene = sim.scene();
        let tb = scene.building(target)?;
        let s_now = sim.pose().s_m;
        let aim_at = if tb.s_m > s_now {
            tb
        } else {
            scene
                .buildings
                .iter()
                .filter(|b| b.side == tb.side && b.s_m > s_now)
                .min_by(|a, b| a.s_m.total_cmp(&b.s_m))
                .unwrap_or(tb)
        };
        let frame = CabinFrame::of(sim.vehicle());
        let tip = Vec3::from(self.params.hand_anchor);
        let to = frame.dir_to_cabin(aim_at.center_world - frame.point_to_world(tip));
        let n1 = self.rng.gaussian();
        let n2 = self.rng.gaussian();
        let (yaw, pitch) = yaw_pitch(to).ok()?;
        let sigma = self.params.noise_deg.to_radians();
        let inv = self.calibration.inverse();
        let sensed = dir_from_yaw_pitch(
            inv.yaw_gain * (yaw + sigma * n1) + inv.yaw_offset_rad,
            inv.pitch_gain * (pitch + sigma * n2) + inv.pitch_offset_rad,
        );
        Some(HandSample { tip, joint3: tip - sensed * self.params.finger_length_m, t: 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_course, CourseParams};

    #[test]
    fn driver_straight_on_center_is_quiet() {
        let cfg = SessionConfig::default();
        let course = generate_course(0, &CourseParams { straight_fraction: 1.0, total_length_m: 500.0, ..Default::default() })
            .unwrap();
        let mut st = VehicleState::on_course(&course, 50.0, course.lane_center_offset(1)).unwrap();
        st.speed_mps = cfg.speed.target_kmh * MPS_PER_KMH;
        let pose = course.project_to_path(st.position).unwrap();
        let c = DriverAgent::new(&cfg).controls_for(&course, &st, &pose);
        assert!(c.steer_rad.abs() < 1e-9);
        assert!(c.accel_mps2.abs() < 1e-9);
    }

    #[test]
    fn driver_right_of_lane_steers_left() {
        let cfg = SessionConfig::default();
        let course = generate_course(0, &CourseParams { straight_fraction: 1.0, total_length_m: 500.0, ..Default::default() })
            .unwrap();
        let st = VehicleState::on_course(&course, 50.0, course.lane_center_offset(1) - 0.5).unwrap();
        let pose = course.project_to_path(st.position).unwrap();
        let c = DriverAgent::new(&cfg).controls_for(&course, &st, &pose);
        assert!(c.steer_rad > 0.0);
    }
}
