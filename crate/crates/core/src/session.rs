//! Fine selection state machine and the target task controller.
//!
//! Activation resolves a rough-pointing candidate and freezes a snapshot of
//! the buildings around the vehicle. Arrow buttons then move the cursor
//! within that snapshot: Up/Down step farther/closer along the same side of
//! the road, Left/Right cross the road. Stepping closer than the current
//! viewpoint moves the viewpoint back along the path so that buildings that
//! were already passed can still be selected.
//!
//! The task controller assigns targets, classifies confirmations into
//! success/wrong/missed and schedules reassignment.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointing::{
    apply_calibration, build_original_ray, resolve_among, CabinFrame, Calibration, HandSample,
    PointingError, ResolveParams,
};
use crate::rng::StreamRng;
use crate::vehicle::VehicleState;
use crate::world::{BuildingId, Interval, PathPose, Scene, Side};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavParams {
    /// Snapshot extent behind the capture point.
    pub back_window_m: f64,
    /// Snapshot extent ahead of the capture point.
    pub view_distance_m: f64,
    /// Distance kept between a backward-exposed building and the viewpoint.
    pub expose_margin_m: f64,
}

impl Default for NavParams {
    fn default() -> Self {
        Self { back_window_m: 100.0, view_distance_m: 150.0, expose_margin_m: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub s_capture_m: f64,
    pub vehicle_pose: PathPose,
    /// Ascending by building arc length.
    pub visible_ids: Vec<BuildingId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    FineSelect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
struct CrossReturn {
    at: BuildingId,
    back_to: BuildingId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionState {
    pub phase: Phase,
    pub snapshot: Option<Snapshot>,
    pub candidate_id: Option<BuildingId>,
    pub view_s_m: f64,
    pub activation_tick: Option<u64>,
    /// Lets an opposite Left/Right undo the last road crossing.
    #[serde(skip)]
    cross_return: Option<CrossReturn>,
}

impl Default for SelectionState {
    fn default() -> Self {
        Self::idle()
    }
}

impl SelectionState {
    pub fn idle() -> Self {
        Self {
            phase: Phase::Idle,
            snapshot: None,
            candidate_id: None,
            view_s_m: 0.0,
            activation_tick: None,
            cross_return: None,
        }
    }

    /// Describes the first broken invariant, if any.
    pub fn check_invariants(&self, scene: &Scene) -> Result<(), String> {
        match self.phase {
            Phase::Idle => {
                if self.snapshot.is_some() || self.candidate_id.is_some() {
                    return Err("idle state carries a snapshot or candidate".into());
                }
            }
            Phase::FineSelect => {
                let snap = self.snapshot.as_ref().ok_or("fine select without snapshot")?;
                let cand = self.candidate_id.ok_or("fine select without candidate")?;
                if self.view_s_m > snap.s_capture_m {
                    return Err(format!("view_s {} ahead of capture {}", self.view_s_m, snap.s_capture_m));
                }
                if !snap.visible_ids.contains(&cand) {
                    return Err(format!("candidate {cand} not in snapshot"));
                }
                let s = |id: BuildingId| scene.building(id).map(|b| b.s_m).unwrap_or(f64::NAN);
                if !(s(cand) > self.view_s_m) {
                    return Err(format!("candidate {cand} is behind the viewpoint"));
                }
                if !snap.visible_ids.windows(2).all(|w| s(w[0]) <= s(w[1])) {
                    return Err("snapshot ids not sorted by arc length".into());
                }
                if self.activation_tick.is_none() {
                    return Err("fine select without activation tick".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Button {
    Activate,
    Up,
    Down,
    Left,
    Right,
    Confirm,
    Cancel,
}

impl Button {
    pub const ALL: [Button; 7] =
        [Button::Activate, Button::Up, Button::Down, Button::Left, Button::Right, Button::Confirm, Button::Cancel];

    pub fn as_str(self) -> &'static str {
        match self {
            Button::Activate => "activate",
            Button::Up => "up",
            Button::Down => "down",
            Button::Left => "left",
            Button::Right => "right",
            Button::Confirm => "confirm",
            Button::Cancel => "cancel",
        }
    }

    pub fn parse(s: &str) -> Option<Button> {
        Button::ALL.into_iter().find(|b| b.as_str() == s)
    }

    pub fn arrow(self) -> Option<Arrow> {
        match self {
            Button::Up => Some(Arrow::Up),
            Button::Down => Some(Arrow::Down),
            Button::Left => Some(Arrow::Left),
            Button::Right => Some(Arrow::Right),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrow {
    Up,
    Down,
    Left,
    Right,
}

impl Arrow {
    pub const ALL: [Arrow; 4] = [Arrow::Up, Arrow::Down, Arrow::Left, Arrow::Right];

    pub fn button(self) -> Button {
        match self {
            Arrow::Up => Button::Up,
            Arrow::Down => Button::Down,
            Arrow::Left => Button::Left,
            Arrow::Right => Button::Right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SelectionEvent {
    Activated { candidate: BuildingId, s_capture_m: f64 },
    RoughMiss { s_capture_m: f64 },
    CursorMoved { dir: Arrow, from: BuildingId, to: BuildingId },
    CursorBlocked { dir: Arrow, at: BuildingId },
    ViewShift { from_s_m: f64, to_s_m: f64 },
    Confirmed { candidate: BuildingId },
    Cancelled { candidate: BuildingId },
    Ignored { button: Button, reason: String },
}

/// Inputs shared by every button press within a tick.
#[derive(Debug, Clone, Copy)]
pub struct SessionContext<'a> {
    pub scene: &'a Scene,
    pub vehicle: &'a VehicleState,
    pub pose: &'a PathPose,
    pub calibration: &'a Calibration,
    pub resolve: &'a ResolveParams,
    pub nav: &'a NavParams,
    pub hand: Option<&'a HandSample>,
}

/// Rough pointing: resolves a candidate and enters fine selection on a hit.
pub fn begin_attempt(
    state: &SelectionState,
    ctx: &SessionContext<'_>,
    hand: &HandSample,
    tick: u64,
) -> Result<(SelectionState, Vec<SelectionEvent>), PointingError> {
    if state.phase != Phase::Idle {
        let ev = SelectionEvent::Ignored { button: Button::Activate, reason: "already selecting".into() };
        return Ok((state.clone(), vec![ev]));
    }
    let ray = apply_calibration(ctx.calibration, &build_original_ray(hand)?)?;
    let world_ray = CabinFrame::of(ctx.vehicle).ray_to_world(&ray);
    let s_capture = ctx.pose.s_m;
    let visible_ids =
        ctx.scene.ids_in_window(s_capture - ctx.nav.back_window_m, s_capture + ctx.nav.view_distance_m);
    let window = visible_ids.iter().filter_map(|&id| ctx.scene.building(id));
    let Some(hit) = resolve_among(&world_ray, window, s_capture, ctx.resolve) else {
        return Ok((SelectionState::idle(), vec![SelectionEvent::RoughMiss { s_capture_m: s_capture }]));
    };
    let mut events = vec![SelectionEvent::Activated { candidate: hit.id, s_capture_m: s_capture }];
    let mut view_s = s_capture;
    let cand_s = ctx.scene.building(hit.id).map(|b| b.s_m).unwrap_or(s_capture);
    if cand_s <= view_s {
        view_s = cand_s - ctx.nav.expose_margin_m;
        events.push(SelectionEvent::ViewShift { from_s_m: s_capture, to_s_m: view_s });
    }
    let next = SelectionState {
        phase: Phase::FineSelect,
        snapshot: Some(Snapshot { s_capture_m: s_capture, vehicle_pose: *ctx.pose, visible_ids }),
        candidate_id: Some(hit.id),
        view_s_m: view_s,
        activation_tick: Some(tick),
        cross_return: None,
    };
    Ok((next, events))
}

/// Where an arrow would move the cursor, without side effects.
fn arrow_target(state: &SelectionState, dir: Arrow, scene: &Scene) -> Option<BuildingId> {
    let snap = state.snapshot.as_ref()?;
    let cand = scene.building(state.candidate_id?)?;
    let in_snap = || snap.visible_ids.iter().filter_map(|&id| scene.building(id));
    match dir {
        Arrow::Up => in_snap()
            .filter(|b| b.side == cand.side && b.s_m > cand.s_m)
            .min_by(|a, b| a.s_m.total_cmp(&b.s_m).then(a.id.cmp(&b.id)))
            .map(|b| b.id),
        Arrow::Down => in_snap()
            .filter(|b| b.side == cand.side && b.s_m < cand.s_m)
            .max_by(|a, b| a.s_m.total_cmp(&b.s_m).then(b.id.cmp(&a.id)))
            .map(|b| b.id),
        Arrow::Left | Arrow::Right => {
            let wanted = if dir == Arrow::Left { Side::Left } else { Side::Right };
            if cand.side == wanted {
                return None;
            }
            if let Some(cr) = state.cross_return {
                if cr.at == cand.id && scene.building(cr.back_to).map(|b| b.side) == Some(wanted) {
                    return Some(cr.back_to);
                }
            }
            in_snap()
                .filter(|b| b.side == wanted)
                .min_by(|a, b| {
                    (a.s_m - cand.s_m)
                        .abs()
                        .total_cmp(&(b.s_m - cand.s_m).abs())
                        .then(a.s_m.total_cmp(&b.s_m))
                        .then(a.id.cmp(&b.id))
                })
                .map(|b| b.id)
        }
    }
}

/// Moves the fine-selection cursor one step.
pub fn move_cursor(
    state: &SelectionState,
    dir: Arrow,
    scene: &Scene,
    nav: &NavParams,
) -> (SelectionState, Vec<SelectionEvent>) {
    let Some(from) = state.candidate_id.filter(|_| state.phase == Phase::FineSelect) else {
        let ev = SelectionEvent::Ignored { button: dir.button(), reason: "not selecting".into() };
        return (state.clone(), vec![ev]);
    };
    let Some(to) = arrow_target(state, dir, scene) else {
        return (state.clone(), vec![SelectionEvent::CursorBlocked { dir, at: from }]);
    };
    let mut next = state.clone();
    let mut events = vec![SelectionEvent::CursorMoved { dir, from, to }];
    next.candidate_id = Some(to);
    next.cross_return = match dir {
        Arrow::Left | Arrow::Right => Some(CrossReturn { at: to, back_to: from }),
        _ => None,
    };
    let to_s = scene.building(to).map(|b| b.s_m).unwrap_or(f64::INFINITY);
    if to_s <= next.view_s_m {
        let shifted = to_s - nav.expose_margin_m;
        events.push(SelectionEvent::ViewShift { from_s_m: next.view_s_m, to_s_m: shifted });
        next.view_s_m = shifted;
    }
    (next, events)
}

/// Routes one button press through the state machine.
pub fn press_button(
    state: &SelectionState,
    ctx: &SessionContext<'_>,
    button: Button,
    tick: u64,
) -> (SelectionState, Vec<SelectionEvent>) {
    let ignored = |reason: &str| {
        (state.clone(), vec![SelectionEvent::Ignored { button, reason: reason.to_string() }])
    };
    match (button, state.phase) {
        (Button::Activate, Phase::Idle) => match ctx.hand {
            None => ignored("no hand sample"),
            Some(hand) => match begin_attempt(state, ctx, hand, tick) {
                Ok(r) => r,
                Err(e) => ignored(&e.to_string()),
            },
        },
        (Button::Activate, Phase::FineSelect) => ignored("already selecting"),
        (Button::Up | Button::Down | Button::Left | Button::Right, Phase::FineSelect) => {
            move_cursor(state, button.arrow().expect("arrow button"), ctx.scene, ctx.nav)
        }
        (Button::Confirm, Phase::FineSelect) => {
            let candidate = state.candidate_id.expect("fine select has a candidate");
            (SelectionState::idle(), vec![SelectionEvent::Confirmed { candidate }])
        }
        (Button::Cancel, Phase::FineSelect) => {
            let candidate = state.candidate_id.expect("fine select has a candidate");
            (SelectionState::idle(), vec![SelectionEvent::Cancelled { candidate }])
        }
        (_, Phase::Idle) => ignored("not selecting"),
    }
}

/// Shortest arrow sequence from the current candidate to `target`.
pub fn arrow_path(state: &SelectionState, target: BuildingId, scene: &Scene, nav: &NavParams) -> Option<Vec<Arrow>> {
    if state.phase != Phase::FineSelect {
        return None;
    }
    if state.candidate_id == Some(target) {
        return Some(Vec::new());
    }
    let key = |s: &SelectionState| (s.candidate_id, s.cross_return);
    let mut seen = HashSet::new();
    seen.insert(key(state));
    let mut queue = VecDeque::from([(state.clone(), Vec::new())]);
    while let Some((cur, path)) = queue.pop_front() {
        for dir in Arrow::ALL {
            let (next, _) = move_cursor(&cur, dir, scene, nav);
            if !seen.insert(key(&next)) {
                continue;
            }
            let mut p = path.clone();
            p.push(dir);
            if next.candidate_id == Some(target) {
                return Some(p);
            }
            queue.push_back((next, p));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub success: u32,
    pub wrong: u32,
    pub missed: u32,
}

impl OutcomeCounts {
    pub fn total(&self) -> u32 {
        self.success + self.wrong + self.missed
    }

    pub fn record(&mut self, o: Outcome) {
        match o {
            Outcome::Success => self.success += 1,
            Outcome::Wrong => self.wrong += 1,
            Outcome::Missed => self.missed += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Wrong,
    Missed,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        !matches!(self, Outcome::Wrong)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskParams {
    pub dt_s: f64,
    /// Time after passing the target during which a correct confirm still counts.
    pub pass_window_s: f64,
    pub reassign_delay_s: Interval,
    /// Closest a new target may be ahead of the vehicle.
    pub min_lead_m: f64,
    /// Farthest a new target may be ahead of the vehicle.
    pub assign_range_m: f64,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self {
            dt_s: crate::vehicle::DT_S,
            pass_window_s: 5.0,
            reassign_delay_s: Interval::new(3.0, 6.0),
            min_lead_m: 20.0,
            assign_range_m: 120.0,
        }
    }
}

impl TaskParams {
    pub fn pass_window_ticks(&self) -> u64 {
        (self.pass_window_s / self.dt_s).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskState {
    pub target_id: Option<BuildingId>,
    pub assigned_tick: Option<u64>,
    pub passed_tick: Option<u64>,
    pub pending_reassign_at: Option<u64>,
    pub counts: OutcomeCounts,
    pub first_activation_tick_for_target: Option<u64>,
    /// Most recent target; later targets lie beyond it.
    pub last_target: Option<BuildingId>,
}

impl TaskState {
    /// Schedules the first assignment; no-op once a target exists or is pending.
    pub fn schedule_first(&mut self, tick: u64) {
        if self.target_id.is_none() && self.pending_reassign_at.is_none() && self.assigned_tick.is_none() {
            self.pending_reassign_at = Some(tick);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TaskEvent {
    TargetAssigned { target: BuildingId, lead_m: f64 },
    Outcome {
        target: BuildingId,
        outcome: Outcome,
        confirmed: Option<BuildingId>,
        passed_tick: Option<u64>,
        tct_ticks: Option<u64>,
    },
    ReassignScheduled { at_tick: u64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("no building is assignable between {lo:.1} m and {hi:.1} m")]
    NoAssignable { lo: f64, hi: f64 },
}

/// RNG substreams owned by the task controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRngs {
    pub assign: StreamRng,
    pub reassign_delay: StreamRng,
}

impl TaskRngs {
    pub fn new(master_seed: u64) -> Self {
        use crate::rng::streams;
        Self {
            assign: StreamRng::substream(master_seed, streams::TASK),
            reassign_delay: StreamRng::substream(master_seed, streams::REASSIGN),
        }
    }
}

/// True once the vehicle is strictly past the target's center.
pub fn target_passed(vehicle_pose: &PathPose, target_s_m: f64) -> bool {
    vehicle_pose.s_m > target_s_m
}

/// Uniform draw among buildings ahead within the assignment window.
pub fn assign_target(
    scene: &Scene,
    vehicle_pose: &PathPose,
    rng: &mut StreamRng,
    params: &TaskParams,
) -> Result<BuildingId, TaskError> {
    assign_target_beyond(scene, vehicle_pose, f64::NEG_INFINITY, rng, params)
}

/// As [`assign_target`], restricted to buildings with `s_m > floor_s`.
pub fn assign_target_beyond(
    scene: &Scene,
    vehicle_pose: &PathPose,
    floor_s: f64,
    rng: &mut StreamRng,
    params: &TaskParams,
) -> Result<BuildingId, TaskError> {
    let lo = vehicle_pose.s_m + params.min_lead_m;
    let hi = vehicle_pose.s_m + params.assign_range_m;
    let eligible: Vec<BuildingId> = scene
        .ids_in_window(lo, hi)
        .into_iter()
        .filter(|&id| {
            let s = scene.buildings[id as usize].s_m;
            s > lo && s > floor_s
        })
        .collect();
    if eligible.is_empty() {
        return Err(TaskError::NoAssignable { lo, hi });
    }
    Ok(eligible[rng.below(eligible.len() as u64) as usize])
}

/// Advances the task by one tick given this tick's selection events.
///
/// Order within a tick: passing is detected from the post-step pose, an
/// expired target is classified Missed, then confirmations are judged, and
/// finally a due reassignment is attempted.
pub fn tick_task(
    task: &TaskState,
    selection_events: &[SelectionEvent],
    scene: &Scene,
    vehicle_pose: &PathPose,
    tick: u64,
    rngs: &mut TaskRngs,
    params: &TaskParams,
) -> (TaskState, Vec<TaskEvent>) {
    let mut t = task.clone();
    let mut out = Vec::new();
    let window = params.pass_window_ticks();

    let schedule = |t: &mut TaskState, out: &mut Vec<TaskEvent>, rngs: &mut TaskRngs| {
        let d = rngs.reassign_delay.uniform(params.reassign_delay_s.lo, params.reassign_delay_s.hi);
        let at = tick + (d / params.dt_s).round() as u64;
        t.pending_reassign_at = Some(at);
        out.push(TaskEvent::ReassignScheduled { at_tick: at });
    };
    let clear = |t: &mut TaskState| {
        t.target_id = None;
        t.passed_tick = None;
        t.first_activation_tick_for_target = None;
    };

    if let Some(target) = t.target_id {
        let target_s = scene.building(target).map(|b| b.s_m).unwrap_or(f64::NEG_INFINITY);
        if t.passed_tick.is_none() && target_passed(vehicle_pose, target_s) {
            t.passed_tick = Some(tick);
        }
        if let Some(p) = t.passed_tick {
            if tick - p > window {
                t.counts.record(Outcome::Missed);
                out.push(TaskEvent::Outcome {
                    target,
                    outcome: Outcome::Missed,
                    confirmed: None,
                    passed_tick: Some(p),
                    tct_ticks: None,
                });
                clear(&mut t);
                schedule(&mut t, &mut out, rngs);
            }
        }
    }

    for ev in selection_events {
        let Some(target) = t.target_id else { continue };
        match ev {
            SelectionEvent::Activated { .. } | SelectionEvent::RoughMiss { .. } => {
                t.first_activation_tick_for_target.get_or_insert(tick);
            }
            SelectionEvent::Confirmed { candidate } => {
                let outcome = if *candidate == target { Outcome::Success } else { Outcome::Wrong };
                t.counts.record(outcome);
                out.push(TaskEvent::Outcome {
                    target,
                    outcome,
                    confirmed: Some(*candidate),
                    passed_tick: t.passed_tick,
                    tct_ticks: t.first_activation_tick_for_target.map(|a| tick - a),
                });
                if outcome == Outcome::Success {
                    clear(&mut t);
                    schedule(&mut t, &mut out, rngs);
                }
            }
            _ => {}
        }
    }

    if t.target_id.is_none() && t.pending_reassign_at.is_some_and(|at| tick >= at) {
        // a target answered early may still be ahead; never ask about it again
        let floor_s = t.last_target.map_or(f64::NEG_INFINITY, |id| scene.buildings[id as usize].s_m);
        if let Ok(id) = assign_target_beyond(scene, vehicle_pose, floor_s, &mut rngs.assign, params) {
            let lead_m = scene.buildings[id as usize].s_m - vehicle_pose.s_m;
            t.target_id = Some(id);
            t.assigned_tick = Some(tick);
            t.passed_tick = None;
            t.first_activation_tick_for_target = None;
            t.pending_reassign_at = None;
            t.last_target = Some(id);
            out.push(TaskEvent::TargetAssigned { target: id, lead_m });
        }
    }
    (t, out)
}
