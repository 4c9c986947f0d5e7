//! The authoritative per-session simulation.

use std::sync::Arc;

use crate::pointing::HandSample;
use crate::session::{
    press_button, tick_task, Button, SelectionEvent, SelectionState, SessionContext, TaskEvent, TaskRngs,
    TaskState,
};
use crate::vehicle::{
    classify_speed, lateral_deviation_near, step_vehicle, Controls, SpeedAlarm, VehicleState,
};
use crate::world::{PathPose, Scenario, Scene};

use super::agents::{DriverAgent, PointerAgent};
use super::config::{Condition, SessionConfig};
use super::log::{digest_hex, encode_event, format_hash, Event, EventLog, EventRecord, LogHasher, LogHeader, StatePayload};
use super::HarnessError;

/// The session ends this far before the end of the course.
pub const END_MARGIN_M: f64 = 60.0;

/// One externally supplied input, applied at the next tick boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Input {
    Control(Controls),
    Hand(HandSample),
    Button(Button),
}

#[derive(Debug, Clone)]
pub struct Simulation {
    config: SessionConfig,
    scene: Arc<Scene>,
    vehicle: VehicleState,
    pose: PathPose,
    deviation_m: f64,
    alarm: SpeedAlarm,
    controls: Controls,
    selection: SelectionState,
    task: TaskState,
    task_rngs: TaskRngs,
    last_hand: Option<HandSample>,
    window_start: Option<u64>,
    log: EventLog,
    hasher: LogHasher,
}

impl Simulation {
    pub fn new(config: &SessionConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let scenario = Scenario::generate(config.seed, config.course.clone(), config.scene.clone())?;
        let digest = digest_hex(scenario.to_json().as_bytes());
        Self::with_scene(config, Arc::new(scenario.scene), digest)
    }

    /// Starts on a prebuilt scene; `scenario_digest` is recorded in the header.
    pub fn with_scene(config: &SessionConfig, scene: Arc<Scene>, scenario_digest: String) -> Result<Self, HarnessError> {
        config.validate()?;
        let course = &scene.course;
        let lane_offset = course.lane_center_offset(config.lane);
        let vehicle = VehicleState::on_course(course, 0.0, lane_offset)?;
        let (pose, deviation_m) = lateral_deviation_near(course, &vehicle, config.lane, 0.0)?;
        let alarm = classify_speed(vehicle.speed_kmh(), &config.speed);
        Ok(Self {
            config: config.clone(),
            vehicle,
            pose,
            deviation_m,
            alarm,
            controls: Controls::default(),
            selection: SelectionState::idle(),
            task: TaskState::default(),
            task_rngs: TaskRngs::new(config.seed),
            last_hand: None,
            window_start: None,
            log: EventLog::new(LogHeader::new(config, scenario_digest)),
            hasher: LogHasher::default(),
            scene,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }
    pub fn scene(&self) -> &Scene {
        &self.scene
    }
    pub fn scene_arc(&self) -> Arc<Scene> {
        Arc::clone(&self.scene)
    }
    pub fn vehicle(&self) -> &VehicleState {
        &self.vehicle
    }
    pub fn pose(&self) -> &PathPose {
        &self.pose
    }
    pub fn alarm(&self) -> SpeedAlarm {
        self.alarm
    }
    pub fn selection(&self) -> &SelectionState {
        &self.selection
    }
    pub fn task(&self) -> &TaskState {
        &self.task
    }
    pub fn controls(&self) -> Controls {
        self.controls
    }
    pub fn window_start(&self) -> Option<u64> {
        self.window_start
    }
    /// Last completed tick; 0 before the first step.
    pub fn tick(&self) -> u64 {
        self.vehicle.tick
    }
    pub fn log(&self) -> &EventLog {
        &self.log
    }

    /// True once the configured duration has elapsed or the course runs out.
    pub fn finished(&self) -> bool {
        self.tick() >= self.config.total_ticks()
            || self.pose.s_m >= self.scene.course.total_length_m - END_MARGIN_M
    }

    fn record(&mut self, tick: u64, event: Event) {
        let t_s = tick as f64 * self.config.dt_s;
        let record = EventRecord { tick, t_s, event };
        self.hasher.push_line(&encode_event(&record));
        self.log.records.push(record);
    }

    /// Applies `inputs` in order, advances one tick and returns the index of
    /// the first record written by this step.
    pub fn step(&mut self, inputs: &[Input]) -> Result<usize, HarnessError> {
        let first = self.log.records.len();
        let tick = self.tick() + 1;
        let t_s = tick as f64 * self.config.dt_s;
        let mut sel_events = Vec::new();
        for input in inputs {
            match *input {
                Input::Control(c) => self.controls = c,
                Input::Hand(h) => {
                    self.record(tick, Event::Hand { tip: h.tip, joint3: h.joint3 });
                    self.last_hand = Some(HandSample { t: t_s, ..h });
                }
                Input::Button(b) => {
                    self.record(tick, Event::Button { id: b });
                    let ctx = SessionContext {
                        scene: &self.scene,
                        vehicle: &self.vehicle,
                        pose: &self.pose,
                        calibration: &self.config.calibration,
                        resolve: &self.config.resolve,
                        nav: &self.config.nav,
                        hand: self.last_hand.as_ref(),
                    };
                    let (next, events) = press_button(&self.selection, &ctx, b, tick);
                    self.selection = next;
                    for ev in events {
                        self.record(tick, selection_record(&ev));
                        sel_events.push(ev);
                    }
                }
            }
        }

        let stepped = step_vehicle(&self.vehicle, self.controls, &self.config.vehicle, self.config.dt_s);
        let projected = stepped.and_then(|v| {
            lateral_deviation_near(&self.scene.course, &v, self.config.lane, self.pose.s_m).map(|p| (v, p))
        });
        let (vehicle, (pose, deviation_m)) = match projected {
            Ok(x) => x,
            Err(e) => {
                self.log.finalize();
                return Err(HarnessError::Aborted { tick, reason: e.to_string(), partial: Box::new(self.log.clone()) });
            }
        };
        self.vehicle = vehicle;
        self.pose = pose;
        self.deviation_m = deviation_m;

        let alarm = classify_speed(self.vehicle.speed_kmh(), &self.config.speed);
        if alarm != self.alarm {
            self.record(tick, Event::AlarmChanged { from: self.alarm, to: alarm });
            self.alarm = alarm;
        }
        if self.window_start.is_none() && alarm == SpeedAlarm::InRange {
            self.window_start = Some(tick);
            if self.config.condition == Condition::DrivingWithInput {
                self.task.schedule_first(tick);
            }
        }
        if self.config.condition == Condition::DrivingWithInput {
            let (task, events) = tick_task(
                &self.task,
                &sel_events,
                &self.scene,
                &self.pose,
                tick,
                &mut self.task_rngs,
                &self.config.task,
            );
            self.task = task;
            for ev in events {
                self.record(tick, task_record(ev));
            }
        }
        let state = StatePayload {
            position: self.vehicle.position,
            heading_rad: self.vehicle.heading_rad,
            speed_mps: self.vehicle.speed_mps,
            s_m: self.pose.s_m,
            lateral_m: self.pose.lateral_m,
            deviation_m: self.deviation_m,
            alarm: self.alarm,
            controls: self.controls,
            phase: self.selection.phase,
            target: self.task.target_id,
            chain: format_hash(self.hasher.finish()),
        };
        self.record(tick, Event::State(state));
        Ok(first)
    }

    /// Seals and returns the log.
    pub fn finish(mut self) -> EventLog {
        self.log.finalize();
        self.log
    }

    /// Seals a copy of the log without consuming the simulation.
    pub fn snapshot_log(&self) -> EventLog {
        let mut log = self.log.clone();
        log.finalize();
        log
    }
}

pub fn selection_record(ev: &SelectionEvent) -> Event {
    match ev.clone() {
        SelectionEvent::Activated { candidate, s_capture_m } => Event::CandidateChanged { candidate, s_capture_m },
        SelectionEvent::RoughMiss { s_capture_m } => Event::RoughMiss { s_capture_m },
        SelectionEvent::CursorMoved { dir, from, to } => Event::CursorMoved { dir, from, to },
        SelectionEvent::CursorBlocked { dir, at } => Event::CursorBlocked { dir, at },
        SelectionEvent::ViewShift { from_s_m, to_s_m } => Event::ViewShift { from_s_m, to_s_m },
        SelectionEvent::Confirmed { candidate } => Event::Confirm { candidate },
        SelectionEvent::Cancelled { candidate } => Event::Cancel { candidate },
        SelectionEvent::Ignored { button, reason } => Event::Ignored { button, reason },
    }
}

fn task_record(ev: TaskEvent) -> Event {
    match ev {
        TaskEvent::TargetAssigned { target, lead_m } => Event::TargetAssigned { target, lead_m },
        TaskEvent::Outcome { target, outcome, confirmed, passed_tick, tct_ticks } => {
            Event::Outcome { target, outcome, confirmed, passed_tick, tct_ticks }
        }
        TaskEvent::ReassignScheduled { at_tick } => Event::ReassignScheduled { at_tick },
    }
}

/// Runs a headless session with the synthetic driver and pointer.
pub fn run_session(config: &SessionConfig) -> Result<EventLog, HarnessError> {
    let mut sim = Simulation::new(config)?;
    let mut driver = DriverAgent::new(config);
    let mut pointer = PointerAgent::new(config);
    let with_input = config.condition == Condition::DrivingWithInput;
    let mut inputs = Vec::new();
    while !sim.finished() {
        inputs.clear();
        inputs.push(Input::Control(driver.act(&sim)));
        if with_input {
            pointer.act(&sim, &mut inputs);
        }
        sim.step(&inputs)?;
    }
    Ok(sim.finish())
}
