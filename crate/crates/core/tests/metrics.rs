mod common;

use proptest::prelude::*;

use pointselect::harness::{Event, EventRecord};
use pointselect::metrics::{
    build_report, compute_llm, compute_sm, measurement_window, occupied_width, sample_sd, success_rate,
    task_completion_times, MeasurementWindow, MetricsError,
};
use pointselect::rng::StreamRng;
use pointselect::session::{Outcome, OutcomeCounts};
use pointselect::vehicle::SpeedPolicy;

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

#[test]
fn sd_matches_double_double_oracle() {
    let mut rng = StreamRng::substream(1, "sd-fuzz");
    for i in 0..1000 {
        let n = 2 + rng.below(400) as usize;
        let offset = match i % 4 {
            0 => 0.0,
            1 => 1e8,
            2 => -1e8 + rng.uniform(-1e3, 1e3),
            _ => rng.uniform(-1e6, 1e6),
        };
        let scale = 10f64.powf(rng.uniform(-4.0, 2.0));
        let v: Vec<f64> = (0..n).map(|_| offset + scale * rng.gaussian()).collect();
        let got = sample_sd(&v).unwrap();
        let want = common::dd_sample_sd(&v);
        assert!(rel(got, want) < 1e-9, "case {i}: {got} vs {want}");
    }
}

#[test]
fn sd_examples() {
    assert_eq!(sample_sd(&[2.0; 4]).unwrap(), 0.0);
    let base = [1.0, 2.0, 3.0, 4.0, 5.0];
    let sd = sample_sd(&base).unwrap();
    assert!((sd - 2.5f64.sqrt()).abs() < 1e-15);
    let shifted: Vec<f64> = base.iter().map(|v| v + 1e8).collect();
    assert!(rel(sample_sd(&shifted).unwrap(), sd) < 1e-9);
    assert!(matches!(sample_sd(&[1.0]), Err(MetricsError::InsufficientData(1))));
}

proptest! {
    #[test]
    fn sd_translation_and_scale(
        v in prop::collection::vec(-100.0f64..100.0, 2..60),
        c in -1e6f64..1e6,
        k in 0.01f64..100.0,
    ) {
        let sd = sample_sd(&v).unwrap();
        prop_assume!(sd > 1e-3);
        let t: Vec<f64> = v.iter().map(|x| x + c).collect();
        prop_assert!(rel(sample_sd(&t).unwrap(), sd) < 1e-9);
        let s: Vec<f64> = v.iter().map(|x| x * k).collect();
        prop_assert!(rel(sample_sd(&s).unwrap(), sd * k) < 1e-12);
    }

    #[test]
    fn success_rate_is_bounded(s in 0u32..1000, w in 0u32..1000, m in 0u32..1000) {
        let c = OutcomeCounts { success: s, wrong: w, missed: m };
        match success_rate(&c) {
            Ok(r) => {
                prop_assert!((0.0..=100.0).contains(&r));
                prop_assert_eq!(r == 100.0, w == 0 && m == 0);
            }
            Err(e) => prop_assert_eq!(e, MetricsError::UndefinedRate),
        }
    }
}

#[test]
fn success_rate_examples() {
    assert_eq!(success_rate(&OutcomeCounts { success: 25, wrong: 0, missed: 0 }).unwrap(), 100.0);
    let r = success_rate(&OutcomeCounts { success: 94, wrong: 2, missed: 1 }).unwrap();
    assert!((r - 9400.0 / 97.0).abs() < 1e-12);
    assert_eq!(format!("{r:.3}"), "96.907");
    assert!(success_rate(&OutcomeCounts::default()).is_err());
}

#[test]
fn occupied_width_examples() {
    assert_eq!(occupied_width(0.92, 1.86), 2.78);
    assert_eq!(occupied_width(1.29, 1.86), 3.15);
    assert_eq!(occupied_width(0.0, 1.86), 1.86);
}

#[test]
fn sine_deviation_sd_is_amplitude_over_root_two() {
    let a = 0.4;
    // 20 full periods of 3 s at 60 Hz
    let n = 3600;
    let dev: Vec<f64> = (0..n).map(|i| a * (2.0 * std::f64::consts::PI * i as f64 / 180.0).sin()).collect();
    let log = common::synthetic_state_log(&dev, &vec![50.0; n]);
    let w = MeasurementWindow { start_tick: 1, end_tick: n as u64 };
    let llm = compute_llm(&log, &w).unwrap();
    assert!(rel(llm, a / 2f64.sqrt()) < 0.01, "{llm}");
    assert_eq!(compute_sm(&log, &w).unwrap(), 0.0);
}

#[test]
fn sawtooth_speed_sd_matches_uniform() {
    // ±1 km/h sawtooth with a 2 s period
    let n = 6000;
    let speed: Vec<f64> = (0..n).map(|i| 50.0 - 1.0 + 2.0 * ((i % 120) as f64 / 120.0)).collect();
    let log = common::synthetic_state_log(&vec![0.0; n], &speed);
    let w = MeasurementWindow { start_tick: 1, end_tick: n as u64 };
    let sm = compute_sm(&log, &w).unwrap();
    assert!(rel(sm, 1.0 / 3f64.sqrt()) < 0.02, "{sm}");
}

#[test]
fn window_matches_linear_scan() {
    let mut rng = StreamRng::substream(2, "window");
    let policy = SpeedPolicy::new(50.0);
    for _ in 0..200 {
        let n = 50 + rng.below(200) as usize;
        let speed: Vec<f64> = (0..n).map(|_| rng.uniform(20.0, 70.0)).collect();
        let log = common::synthetic_state_log(&vec![0.0; n], &speed);
        let first = speed.iter().position(|&v| (39.0..=61.0).contains(&(v / 3.6 * 3.6)));
        match (measurement_window(&log, &policy), first) {
            (Ok(w), Some(i)) => {
                assert_eq!(w.start_tick, i as u64 + 1);
                assert_eq!(w.end_tick, n as u64);
            }
            (Err(MetricsError::NoWindow), None) => {}
            (got, want) => panic!("{got:?} vs {want:?}"),
        }
    }
    let slow = common::synthetic_state_log(&[0.0; 10], &[20.0; 10]);
    assert!(matches!(measurement_window(&slow, &policy), Err(MetricsError::NoWindow)));
}

fn push(log: &mut pointselect::harness::EventLog, tick: u64, event: Event) {
    log.records.push(EventRecord { tick, t_s: tick as f64 / 60.0, event });
}

#[test]
fn tct_from_first_activation() {
    let mut log = common::synthetic_state_log(&[], &[]);
    log.records.clear();
    push(&mut log, 600, Event::TargetAssigned { target: 3, lead_m: 50.0 });
    push(&mut log, 738, Event::CandidateChanged { candidate: 4, s_capture_m: 0.0 });
    push(&mut log, 800, Event::Confirm { candidate: 4 });
    push(&mut log, 800, Event::Outcome { target: 3, outcome: Outcome::Wrong, confirmed: Some(4), passed_tick: None, tct_ticks: Some(62) });
    push(&mut log, 840, Event::CandidateChanged { candidate: 3, s_capture_m: 0.0 });
    push(&mut log, 846, Event::Confirm { candidate: 3 });
    push(&mut log, 846, Event::Outcome { target: 3, outcome: Outcome::Success, confirmed: Some(3), passed_tick: None, tct_ticks: Some(108) });
    let t = task_completion_times(&log).unwrap();
    assert_eq!(t.list_s, vec![108.0 / 60.0]);
    // activate at 12.3 s, confirm at 14.1 s
    assert!((t.list_s[0] - 1.8).abs() < 1e-12);
}

#[test]
fn orphan_success_is_an_integrity_error() {
    let mut log = common::synthetic_state_log(&[], &[]);
    push(&mut log, 10, Event::TargetAssigned { target: 1, lead_m: 50.0 });
    push(&mut log, 20, Event::Outcome { target: 1, outcome: Outcome::Success, confirmed: Some(1), passed_tick: None, tct_ticks: None });
    assert!(matches!(task_completion_times(&log), Err(MetricsError::Integrity(_))));
}

#[test]
fn report_without_outcomes_explains_missing_rate() {
    let n = 100;
    let log = common::synthetic_state_log(&vec![0.1; n], &vec![50.0; n]);
    let r = build_report(&log).unwrap();
    assert_eq!(r.sr_percent, None);
    assert!(r.sr_note.is_some());
    assert_eq!(r.counts, OutcomeCounts::default());
    assert!(r.low_target_count);
    assert_eq!(r.llm_m, 0.0);
    assert_eq!(r.sample_count, n);
}
