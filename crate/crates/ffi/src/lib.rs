//! C ABI over the pointselect simulator.
//!
//! Objects are handed out as opaque pointers and released with the matching
//! `*_free` function. Every fallible call returns a [`PsStatus`]; on failure
//! the message is available from [`ps_last_error_message`] on the same
//! thread. Strings returned through out-parameters are owned by the caller
//! and released with [`ps_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pointselect::geom::Vec3;
use pointselect::harness::server::frame_message;
use pointselect::harness::{replay, run_session, EventLog, HarnessError, Input, ReplayVerdict, SessionConfig, Simulation};
use pointselect::metrics::build_report;
use pointselect::pointing::{resolve_among, HandSample, Ray, ResolveParams};
use pointselect::session::Button;
use pointselect::vehicle::Controls;
use pointselect::world::{validate_scene, CourseParams, Scenario, SceneParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Parse = 3,
    World = 4,
    Runtime = 5,
    Io = 6,
    Panic = 7,
}

/// Button codes accepted by [`ps_session_step`].
pub const PS_BUTTON_NONE: i32 = -1;
pub const PS_BUTTON_ACTIVATE: i32 = 0;
pub const PS_BUTTON_UP: i32 = 1;
pub const PS_BUTTON_DOWN: i32 = 2;
pub const PS_BUTTON_LEFT: i32 = 3;
pub const PS_BUTTON_RIGHT: i32 = 4;
pub const PS_BUTTON_CONFIRM: i32 = 5;
pub const PS_BUTTON_CANCEL: i32 = 6;

/// Replay outcomes reported by [`ps_log_replay`].
pub const PS_REPLAY_VERIFIED: i32 = 0;
pub const PS_REPLAY_DIVERGED: i32 = 1;
pub const PS_REPLAY_HASH_MISMATCH: i32 = 2;
pub const PS_REPLAY_SCENARIO_MISMATCH: i32 = 3;

pub struct PsScenario(Scenario);
pub struct PsSession(Simulation);
pub struct PsLog(EventLog);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: PsStatus, msg: impl Into<String>) -> PsStatus {
    set_error(msg);
    status
}

fn harness_status(e: &HarnessError) -> PsStatus {
    match e {
        HarnessError::Config(_) => PsStatus::InvalidArgument,
        HarnessError::World(_) => PsStatus::World,
        HarnessError::Parse { .. } => PsStatus::Parse,
        HarnessError::Io(_) => PsStatus::Io,
        HarnessError::Vehicle(_) | HarnessError::Aborted { .. } => PsStatus::Runtime,
    }
}

fn guard(f: impl FnOnce() -> PsStatus) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(PsStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, PsStatus> {
    if p.is_null() {
        return Err(fail(PsStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(PsStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> PsStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            PsStatus::Ok
        }
        Err(_) => fail(PsStatus::Runtime, "string contains a nul byte"),
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(PsStatus::NullArgument, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ps_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Generates a scenario with default parameters; `length_m <= 0` keeps the
/// default course length.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_scenario_generate(seed: u64, length_m: f64, out: *mut *mut PsScenario) -> PsStatus {
    non_null!(out);
    guard(|| {
        let mut course = CourseParams::default();
        if length_m > 0.0 {
            course.total_length_m = length_m;
        }
        match Scenario::generate(seed, course, SceneParams::default()) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(PsScenario(s)));
                PsStatus::Ok
            }
            Err(e) => fail(PsStatus::World, e.to_string()),
        }
    })
}

/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_scenario_from_json(json: *const c_char, out: *mut *mut PsScenario) -> PsStatus {
    non_null!(out);
    guard(|| {
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Scenario::from_json(text) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(PsScenario(s)));
                PsStatus::Ok
            }
            Err(e) => fail(PsStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `scenario` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ps_scenario_to_json(scenario: *const PsScenario, out: *mut *mut c_char) -> PsStatus {
    non_null!(scenario, out);
    guard(|| put_string(out, (*scenario).0.to_json()))
}

/// # Safety
/// `scenario` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ps_scenario_building_count(scenario: *const PsScenario, out: *mut usize) -> PsStatus {
    non_null!(scenario, out);
    *out = (*scenario).0.scene.buildings.len();
    PsStatus::Ok
}

/// Number of placement-constraint violations.
///
/// # Safety
/// `scenario` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ps_scenario_validate(scenario: *const PsScenario, out: *mut usize) -> PsStatus {
    non_null!(scenario, out);
    guard(|| {
        let s = &(*scenario).0;
        *out = validate_scene(&s.scene, &s.scene_params).len();
        PsStatus::Ok
    })
}

/// Resolves a world-frame ray with default resolver parameters. `out_id` is
/// set to -1 when nothing lies within range and angle.
///
/// # Safety
/// `origin` and `dir` must point to 3 doubles; `scenario` and `out_id` must
/// be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_scenario_resolve(
    scenario: *const PsScenario,
    origin: *const f64,
    dir: *const f64,
    origin_s_m: f64,
    out_id: *mut i64,
) -> PsStatus {
    non_null!(scenario, origin, dir, out_id);
    guard(|| {
        let o = std::slice::from_raw_parts(origin, 3);
        let d = std::slice::from_raw_parts(dir, 3);
        let Some(dir) = Vec3::new(d[0], d[1], d[2]).normalized() else {
            return fail(PsStatus::InvalidArgument, "dir must be non-zero and finite");
        };
        let ray = Ray { origin: Vec3::new(o[0], o[1], o[2]), dir };
        let hit = resolve_among(&ray, &(*scenario).0.scene.buildings, origin_s_m, &ResolveParams::default());
        *out_id = hit.map_or(-1, |r| r.id as i64);
        PsStatus::Ok
    })
}

/// # Safety
/// `scenario` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ps_scenario_free(scenario: *mut PsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

unsafe fn config_arg(json: *const c_char) -> Result<SessionConfig, PsStatus> {
    if json.is_null() {
        return Ok(SessionConfig::default());
    }
    let text = str_arg(json, "config_json")?;
    SessionConfig::from_json(text).map_err(|e| fail(PsStatus::InvalidArgument, e.to_string()))
}

/// Starts a live session; a null `config_json` selects the defaults.
///
/// # Safety
/// `config_json` must be null or nul-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_session_new(config_json: *const c_char, out: *mut *mut PsSession) -> PsStatus {
    non_null!(out);
    guard(|| {
        let cfg = match config_arg(config_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        match Simulation::new(&cfg) {
            Ok(sim) => {
                *out = Box::into_raw(Box::new(PsSession(sim)));
                PsStatus::Ok
            }
            Err(e) => fail(harness_status(&e), e.to_string()),
        }
    })
}

/// Advances one tick. Inputs apply in the order controls, hand, button.
/// `hand_tip` and `hand_joint3` are both null or both point to 3 doubles in
/// the cabin frame; `button` is one of the `PS_BUTTON_*` codes.
///
/// # Safety
/// Pointers must be valid as described.
#[no_mangle]
pub unsafe extern "C" fn ps_session_step(
    session: *mut PsSession,
    steer_rad: f64,
    accel_mps2: f64,
    hand_tip: *const f64,
    hand_joint3: *const f64,
    button: i32,
) -> PsStatus {
    non_null!(session);
    guard(|| {
        let mut inputs = vec![Input::Control(Controls { steer_rad, accel_mps2 })];
        match (hand_tip.is_null(), hand_joint3.is_null()) {
            (true, true) => {}
            (false, false) => {
                let t = std::slice::from_raw_parts(hand_tip, 3);
                let j = std::slice::from_raw_parts(hand_joint3, 3);
                inputs.push(Input::Hand(HandSample {
                    tip: Vec3::new(t[0], t[1], t[2]),
                    joint3: Vec3::new(j[0], j[1], j[2]),
                    t: 0.0,
                }));
            }
            _ => return fail(PsStatus::InvalidArgument, "hand_tip and hand_joint3 must both be set or both null"),
        }
        if button != PS_BUTTON_NONE {
            match usize::try_from(button).ok().and_then(|i| Button::ALL.get(i)) {
                Some(b) => inputs.push(Input::Button(*b)),
                None => return fail(PsStatus::InvalidArgument, format!("unknown button code {button}")),
            }
        }
        match (*session).0.step(&inputs) {
            Ok(_) => PsStatus::Ok,
            Err(e) => fail(harness_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `session` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ps_session_tick(session: *const PsSession, out: *mut u64) -> PsStatus {
    non_null!(session, out);
    *out = (*session).0.tick();
    PsStatus::Ok
}

/// # Safety
/// `session` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ps_session_finished(session: *const PsSession, out: *mut bool) -> PsStatus {
    non_null!(session, out);
    *out = (*session).0.finished();
    PsStatus::Ok
}

/// Current state as a protocol `frame` message.
///
/// # Safety
/// `session` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ps_session_frame_json(session: *const PsSession, out: *mut *mut c_char) -> PsStatus {
    non_null!(session, out);
    guard(|| put_string(out, frame_message(&(*session).0).to_string()))
}

/// Seals the session log. The session handle stays valid and may keep
/// stepping; the returned log is a snapshot.
///
/// # Safety
/// `session` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ps_session_log(session: *const PsSession, out: *mut *mut PsLog) -> PsStatus {
    non_null!(session, out);
    guard(|| {
        *out = Box::into_raw(Box::new(PsLog((*session).0.snapshot_log())));
        PsStatus::Ok
    })
}

/// # Safety
/// `session` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ps_session_free(session: *mut PsSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Runs a headless session with the synthetic agents.
///
/// # Safety
/// `config_json` must be null or nul-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_run_session(config_json: *const c_char, out: *mut *mut PsLog) -> PsStatus {
    non_null!(out);
    guard(|| {
        let cfg = match config_arg(config_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        match run_session(&cfg) {
            Ok(log) => {
                *out = Box::into_raw(Box::new(PsLog(log)));
                PsStatus::Ok
            }
            Err(e) => fail(harness_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `path` must be nul-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_log_read(path: *const c_char, out: *mut *mut PsLog) -> PsStatus {
    non_null!(out);
    guard(|| {
        let p = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match EventLog::read_from(Path::new(p)) {
            Ok(log) => {
                *out = Box::into_raw(Box::new(PsLog(log)));
                PsStatus::Ok
            }
            Err(e) => fail(harness_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `log` must be valid; `path` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn ps_log_write(log: *const PsLog, path: *const c_char) -> PsStatus {
    non_null!(log);
    guard(|| {
        let p = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match (*log).0.write_to(Path::new(p)) {
            Ok(()) => PsStatus::Ok,
            Err(e) => fail(harness_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `log` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ps_log_record_count(log: *const PsLog, out: *mut usize) -> PsStatus {
    non_null!(log, out);
    *out = (*log).0.records.len();
    PsStatus::Ok
}

/// FNV-1a 64 hash over the canonical record lines.
///
/// # Safety
/// `log` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ps_log_hash(log: *const PsLog, out: *mut u64) -> PsStatus {
    non_null!(log, out);
    guard(|| {
        *out = (*log).0.compute_hash();
        PsStatus::Ok
    })
}

/// Re-simulates the log. `out_verdict` receives a `PS_REPLAY_*` code and
/// `out_tick` the divergent tick (0 when verified).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_log_replay(log: *const PsLog, out_verdict: *mut i32, out_tick: *mut u64) -> PsStatus {
    non_null!(log, out_verdict, out_tick);
    guard(|| match replay(&(*log).0) {
        Ok(v) => {
            let (code, tick) = match v {
                ReplayVerdict::Verified { .. } => (PS_REPLAY_VERIFIED, 0),
                ReplayVerdict::Diverged { tick, .. } => (PS_REPLAY_DIVERGED, tick),
                ReplayVerdict::HashMismatch { tick, .. } => (PS_REPLAY_HASH_MISMATCH, tick),
                ReplayVerdict::ScenarioMismatch { .. } => (PS_REPLAY_SCENARIO_MISMATCH, 0),
            };
            *out_verdict = code;
            *out_tick = tick;
            PsStatus::Ok
        }
        Err(e) => fail(harness_status(&e), e.to_string()),
    })
}

/// Metrics report as JSON.
///
/// # Safety
/// `log` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ps_log_report_json(log: *const PsLog, out: *mut *mut c_char) -> PsStatus {
    non_null!(log, out);
    guard(|| match build_report(&(*log).0) {
        Ok(r) => put_string(out, r.to_json()),
        Err(e) => fail(PsStatus::Runtime, e.to_string()),
    })
}

/// # Safety
/// `log` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ps_log_free(log: *mut PsLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}
