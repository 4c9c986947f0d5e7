mod common;

use proptest::prelude::*;

use pointselect::geom::Vec3;
use pointselect::pointing::{
    apply_calibration, build_original_ray, dir_from_yaw_pitch, fit_calibration, resolve_among,
    resolve_candidate, CabinFrame, Calibration, HandSample, PointingError, Ray, ResolveParams,
};
use pointselect::rng::StreamRng;
use pointselect::vehicle::VehicleState;
use pointselect::world::{PathPose, Side};

#[test]
fn resolver_matches_brute_force() {
    let scenes = common::resolver_scenes(10);
    let mut rng = StreamRng::substream(7, "resolver-cases");
    let mut hits = 0;
    for i in 0..2000 {
        let c = common::resolver_case(&scenes, &mut rng);
        let scene = &scenes[c.scene];
        let got = resolve_candidate(&c.ray, scene, &c.pose, &c.params);
        let want = common::brute_resolve(&c.ray, &scene.buildings, c.pose.s_m, &c.params);
        assert_eq!(got, want, "case {i}");
        hits += got.is_some() as u32;
    }
    // both outcomes must be well represented
    assert!(hits > 400 && hits < 1900, "{hits} hits");
}

#[test]
fn mirrored_pair_ties_break_by_id() {
    let scene = common::line_scene(&[200.0], &[200.0]);
    let params = ResolveParams { forward_only: true, ..Default::default() };
    let center_height = scene.buildings[0].center_world.z;
    let ray = Ray { origin: Vec3::new(100.0, 0.0, center_height), dir: Vec3::new(1.0, 0.0, 0.0) };
    let pose = PathPose { s_m: 100.0, lateral_m: 0.0, path_heading_rad: 0.0 };
    let a = scene.buildings[0].center_world - ray.origin;
    let b = scene.buildings[1].center_world - ray.origin;
    assert_eq!(ray.dir.angle_to(a), ray.dir.angle_to(b));
    assert_eq!(resolve_candidate(&ray, &scene, &pose, &params), Some(0));
    // reversed iteration order gives the same answer
    let rev: Vec<_> = scene.buildings.iter().rev().collect();
    assert_eq!(resolve_among(&ray, rev, 100.0, &params).map(|r| r.id), Some(0));
}

#[test]
fn equal_angle_prefers_nearer() {
    // two buildings on one line through the ray origin
    let scene = common::line_scene(&[], &[150.0, 300.0]);
    let origin = Vec3::new(100.0, 0.0, 5.0);
    let near = scene.buildings[0].center_world;
    let dir = (near - origin).normalized().unwrap();
    let mut far = scene.buildings[1].clone();
    far.center_world = origin + dir * 120.0;
    let buildings = [far.clone(), scene.buildings[0].clone()];
    let hit = resolve_among(&Ray { origin, dir }, &buildings, 100.0, &ResolveParams::default()).unwrap();
    assert_eq!(hit.id, scene.buildings[0].id);
}

#[test]
fn building_behind_vehicle_is_ignored_when_forward_only() {
    let scene = common::line_scene(&[], &[80.0, 180.0]);
    let ray = Ray { origin: Vec3::new(100.0, 0.0, 5.0), dir: Vec3::new(-1.0, -0.3, 0.0).normalized().unwrap() };
    let pose = PathPose { s_m: 100.0, lateral_m: 0.0, path_heading_rad: 0.0 };
    let fwd = ResolveParams { forward_only: true, max_angle_rad: 3.0, ..Default::default() };
    assert_eq!(resolve_candidate(&ray, &scene, &pose, &fwd), Some(1));
    let any = ResolveParams { forward_only: false, ..fwd };
    assert_eq!(resolve_candidate(&ray, &scene, &pose, &any), Some(0));
    let narrow = ResolveParams { max_angle_rad: 0.5, ..fwd };
    assert_eq!(resolve_candidate(&ray, &scene, &pose, &narrow), None);
}

#[test]
fn resolution_is_scale_invariant_about_origin() {
    let scenes = common::resolver_scenes(3);
    let mut rng = StreamRng::substream(11, "scale-cases");
    for _ in 0..300 {
        let c = common::resolver_case(&scenes, &mut rng);
        let scene = &scenes[c.scene];
        let base = resolve_among(&c.ray, &scene.buildings, c.pose.s_m, &c.params).map(|r| r.id);
        for k in [0.5, 2.0, 4.0] {
            let mut scaled = scene.buildings.clone();
            for b in &mut scaled {
                b.center_world = c.ray.origin + (b.center_world - c.ray.origin) * k;
            }
            let params = ResolveParams { range_m: c.params.range_m * k, ..c.params };
            let got = resolve_among(&c.ray, &scaled, c.pose.s_m, &params).map(|r| r.id);
            assert_eq!(got, base, "scale {k}");
        }
    }
}

fn hand(joint3: Vec3, tip: Vec3) -> HandSample {
    HandSample { tip, joint3, t: 0.0 }
}

proptest! {
    #[test]
    fn ray_direction_is_unit(
        j in prop::array::uniform3(-2.0f64..2.0),
        d in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let joint3 = Vec3::from(j);
        let dv = Vec3::from(d);
        prop_assume!(dv.norm() > 1e-6);
        let r = build_original_ray(&hand(joint3, joint3 + dv)).unwrap();
        prop_assert!((r.dir.norm() - 1.0).abs() < 1e-12);
        prop_assert!(r.dir.angle_to(dv) < 1e-9);
    }

    #[test]
    fn calibration_inverse_composes_to_identity(
        yaw in -1.2f64..1.2, pitch in -0.8f64..0.8,
        yg in 0.5f64..2.0, yo in -0.3f64..0.3, pg in 0.5f64..2.0, po in -0.3f64..0.3,
    ) {
        let cal = Calibration { yaw_gain: yg, yaw_offset_rad: yo, pitch_gain: pg, pitch_offset_rad: po };
        let ray = Ray { origin: Vec3::ZERO, dir: dir_from_yaw_pitch(yaw, pitch) };
        // stay on the principal branch so the inverse is well defined
        prop_assume!((yg * yaw + yo).abs() < 3.0 && (pg * pitch + po).abs() < 1.5);
        let there = apply_calibration(&cal, &ray).unwrap();
        let back = apply_calibration(&cal.inverse(), &there).unwrap();
        prop_assert!(back.dir.angle_to(ray.dir) < 1e-9);
    }

    #[test]
    fn cabin_frame_round_trips(
        x in -500.0f64..500.0, y in -500.0f64..500.0, h in -3.2f64..3.2,
        p in prop::array::uniform3(-50.0f64..50.0),
    ) {
        let v = VehicleState { position: Vec3::new(x, y, 0.0), heading_rad: h, speed_mps: 0.0, tick: 0 };
        let f = CabinFrame::of(&v);
        let q = Vec3::from(p);
        prop_assert!(f.point_to_cabin(f.point_to_world(q)).distance(q) < 1e-9);
        // orthonormal; x right, y up, z forward makes the frame left-handed
        for (a, b) in [(f.right, f.up), (f.up, f.forward), (f.forward, f.right)] {
            prop_assert!(a.dot(b).abs() < 1e-12);
            prop_assert!((a.norm() - 1.0).abs() < 1e-12);
        }
        prop_assert!((f.right.cross(f.up) + f.forward).norm() < 1e-12);
    }
}

#[test]
fn cabin_axes_match_vehicle_heading() {
    let v = VehicleState { position: Vec3::ZERO, heading_rad: 0.0, speed_mps: 0.0, tick: 0 };
    let f = CabinFrame::of(&v);
    assert!((f.dir_to_world(Vec3::new(0.0, 0.0, 1.0)) - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
    // cabin +x points to the right of travel, which is world -y here
    assert!((f.dir_to_world(Vec3::new(1.0, 0.0, 0.0)) - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
    assert_eq!(Side::Right.sign(), -1.0);
}

fn calibration_pairs(cal: &Calibration, grid: &[(f64, f64)]) -> Vec<(HandSample, Vec3)> {
    // sensed angles are what the inverse map produces from the truth
    let inv = cal.inverse();
    grid.iter()
        .map(|&(y, p)| {
            let sensed = dir_from_yaw_pitch(inv.yaw_gain * y + inv.yaw_offset_rad, inv.pitch_gain * p + inv.pitch_offset_rad);
            (hand(Vec3::ZERO, sensed * 0.05), dir_from_yaw_pitch(y, p))
        })
        .collect()
}

fn grid(span_deg: f64) -> Vec<(f64, f64)> {
    let s = span_deg.to_radians() / 2.0;
    let mut g = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            g.push((-s + s * i as f64, -s / 2.0 + s / 2.0 * j as f64));
        }
    }
    g
}

#[test]
fn fit_recovers_yaw_bias() {
    let truth = Calibration { yaw_offset_rad: 5f64.to_radians(), ..Calibration::IDENTITY };
    let fit = fit_calibration(&calibration_pairs(&truth, &grid(40.0))).unwrap();
    assert!((fit.calibration.yaw_offset_rad - truth.yaw_offset_rad).abs() < 1e-9);
    assert!((fit.calibration.yaw_gain - 1.0).abs() < 1e-9);
    assert!(fit.residual_rms_rad < 1e-9);
}

#[test]
fn fit_recovers_gains_and_offsets() {
    let truth = Calibration { yaw_gain: 1.2, yaw_offset_rad: -0.05, pitch_gain: 0.8, pitch_offset_rad: 0.03 };
    let fit = fit_calibration(&calibration_pairs(&truth, &grid(50.0))).unwrap();
    let c = fit.calibration;
    for (a, b) in [
        (c.yaw_gain, truth.yaw_gain),
        (c.yaw_offset_rad, truth.yaw_offset_rad),
        (c.pitch_gain, truth.pitch_gain),
        (c.pitch_offset_rad, truth.pitch_offset_rad),
    ] {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn fit_rejects_narrow_span_and_few_pairs() {
    let pairs = calibration_pairs(&Calibration::IDENTITY, &grid(6.0));
    assert!(matches!(fit_calibration(&pairs), Err(PointingError::IllConditioned(_))));
    let pairs = calibration_pairs(&Calibration::IDENTITY, &grid(40.0));
    assert!(matches!(fit_calibration(&pairs[..3]), Err(PointingError::IllConditioned(_))));
}
