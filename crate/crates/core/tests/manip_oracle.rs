use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Rotation3;
use proptest::prelude::*;

use thumbaxis_core::config::RunConfig;
use thumbaxis_core::geom::{AxisConfig, Point3, Vec3};
use thumbaxis_core::grasp::{GraspRequirements, RadiusRange};
use thumbaxis_core::hand::{FingerRadii, HandModel};
use thumbaxis_core::kinematics::{NormalRule, ThumbModel, ThumbTip, Trajectory};
use thumbaxis_core::manip::{manipulation_range, manipulation_width, transition_analysis, transition_report, WidthInterval};
use thumbaxis_core::optimizer::{optimize, OptimizeOptions};
use thumbaxis_core::oracle::oracle_width_sweep;

const DELTA: f64 = 4.868;

fn requirements() -> GraspRequirements {
    GraspRequirements {
        precision: RadiusRange::new(0.0, 60.0),
        lateral: RadiusRange::new(0.0, 30.0),
        tripod: RadiusRange::new(10.0, 80.0),
        manipulation_width: RadiusRange::new(0.0, 30.0),
        theta_min: 110f64.to_radians(),
        alpha_perm: 30f64.to_radians(),
        force_dir_limit: PI,
    }
}

/// Index tip parked at the origin, pad facing +z, side facing +x. The thumb
/// circles in the x-z plane from -20 to 100 degrees.
fn circling_hand(radius: f64) -> HandModel {
    let thumb = ThumbModel::uniform(ThumbTip { radial: radius, axial: 0.0, phase: 0.0 }, (-20f64.to_radians(), 100f64.to_radians()), 241).unwrap();
    let pts = vec![Point3::new(0.0, 0.0, -1e-4), Point3::origin()];
    let index = Trajectory::from_points(pts, vec![0.0, 1.0], &NormalRule::default()).unwrap();
    let middle = index.transformed(&nalgebra::Matrix3::identity(), &Vec3::new(-20.0, 0.0, 0.0));
    HandModel::new(FingerRadii { thumb: 8.0, index: 8.0, middle: 8.0 }, thumb, index, middle, None).unwrap()
}

/// Thumb axis along -y, so local +y maps to world +z.
fn axis_at(origin: Point3) -> AxisConfig {
    AxisConfig::new(origin, PI / 2.0, 0.0, 0.0)
}

#[test]
fn constant_distance_transition_gives_twice_the_deformation() {
    let hand = circling_hand(30.0);
    let cfg = axis_at(Point3::origin());
    let a = manipulation_range(&cfg, &hand, &requirements(), DELTA);
    let w = a.overall;
    assert!(!w.is_empty());
    assert!((w.lo - 14.0).abs() < 1e-3, "{w:?}");
    assert!((w.width() - 2.0 * DELTA).abs() < 1e-3, "{w:?}");
    let o = oracle_width_sweep(&cfg, &hand, &requirements(), DELTA, 0.01);
    assert!((o.lo - w.lo).abs() <= 0.01 && (o.hi - w.hi).abs() <= 0.01, "{o:?} vs {w:?}");
}

#[test]
fn large_excursion_leaves_nothing() {
    let hand = circling_hand(60.0);
    let cfg = axis_at(Point3::new(30.0, 0.0, 0.0));
    let a = manipulation_range(&cfg, &hand, &requirements(), DELTA);
    assert!(a.per_index.iter().all(|r| r.critical.is_some()));
    assert!(a.per_index.iter().any(|r| r.d_max.unwrap() - r.d_min.unwrap() > 2.0 * DELTA));
    assert!(a.overall.is_empty());
    assert!(oracle_width_sweep(&cfg, &hand, &requirements(), DELTA, 0.01).is_empty());
}

#[test]
fn missing_lateral_pose_is_not_capable() {
    let hand = circling_hand(30.0);
    // Rotating the sweep start past the lateral window removes every lateral pose.
    let thumb = ThumbModel::uniform(ThumbTip { radial: 30.0, axial: 0.0, phase: 0.0 }, (45f64.to_radians(), 100f64.to_radians()), 60).unwrap();
    let hand = HandModel { thumb, ..hand };
    let cfg = axis_at(Point3::origin());
    assert!(manipulation_range(&cfg, &hand, &requirements(), DELTA).overall.is_empty());
    let r = transition_report(&hand.thumb_trajectory(&cfg), &hand, &requirements(), DELTA, 15.0);
    assert!(!r.capable && !r.pass);
}

#[test]
fn reference_hand_agrees_with_sweep_and_intersection_law() {
    let mut cfg = RunConfig::reference();
    cfg.grid = cfg.grid.with_uniform_steps(5);
    let p = cfg.build(Path::new(".")).unwrap();
    let res = optimize(&p, &OptimizeOptions { top_k: 8, ..Default::default() }).unwrap();
    assert!(!res.top_k.is_empty());
    for r in &res.top_k {
        let a = manipulation_range(&r.config, &p.hand, &p.req, p.delta_m);
        assert_eq!(a.overall, r.interval);
        for rec in &a.per_index {
            assert!(a.overall.is_subset_of(&rec.interval.clip_nonnegative()), "{:?} vs {:?}", a.overall, rec.interval);
        }
        let o = oracle_width_sweep(&r.config, &p.hand, &p.req, p.delta_m, 0.05);
        match (o.is_empty(), a.overall.is_empty()) {
            (true, true) => {}
            (true, false) => assert!(a.overall.width() < 0.05, "{:?}", a.overall),
            (false, false) => assert!((o.lo - a.overall.lo).abs() <= 0.05 && (o.hi - a.overall.hi).abs() <= 0.05, "{o:?} vs {:?}", a.overall),
            (false, true) => panic!("oracle found {o:?} where main found nothing"),
        }
        if !a.overall.is_empty() {
            let thumb = p.hand.thumb_trajectory(&r.config);
            let mid = 0.5 * (a.overall.lo + a.overall.hi);
            assert!(transition_report(&thumb, &p.hand, &p.req, p.delta_m, mid).pass);
            assert!(!transition_report(&thumb, &p.hand, &p.req, p.delta_m, a.overall.hi + 0.5).pass);
        }
    }
}

#[test]
fn early_exit_width_matches_full_analysis() {
    let p = RunConfig::reference().build(Path::new(".")).unwrap();
    for i in (0..p.grid.total()).step_by(997) {
        let cfg = p.grid.config_at(i);
        let thumb = p.hand.thumb_trajectory(&cfg);
        let rs = p.hand.radii.thumb + p.hand.radii.index;
        let full = transition_analysis(thumb.samples(), p.hand.manipulation_index.samples(), rs, &p.req, p.delta_m).overall;
        let fast = manipulation_width(thumb.samples(), p.hand.manipulation_index.samples(), rs, &p.req, p.delta_m);
        assert_eq!(full.is_empty(), fast.is_empty());
        if !full.is_empty() {
            assert_eq!(full, fast);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn circle_widths_follow_radius_and_ignore_placement(
        radius in 20.0f64..60.0,
        a in -PI..PI, b in -1.5f64..1.5, c in -PI..PI,
        t in prop::array::uniform3(-100.0f64..100.0),
    ) {
        let hand = circling_hand(radius);
        let cfg = axis_at(Point3::origin());
        let req = requirements();
        let base = manipulation_range(&cfg, &hand, &req, DELTA).overall;
        prop_assert!((base.lo - (radius - 16.0)).abs() < 1e-3);
        prop_assert!((base.width() - 2.0 * DELTA).abs() < 1e-3);

        let m = Rotation3::from_euler_angles(a, b, c).into_inner();
        let off = Vec3::from(t);
        let thumb = hand.thumb_trajectory(&cfg).transformed(&m, &off);
        let index = hand.manipulation_index.transformed(&m, &off);
        let moved: WidthInterval = manipulation_width(thumb.samples(), index.samples(), 16.0, &req, DELTA);
        prop_assert!((moved.lo - base.lo).abs() < 1e-9 && (moved.hi - base.hi).abs() < 1e-9);
    }
}
