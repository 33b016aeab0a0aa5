use std::path::Path;

use proptest::prelude::*;

use thumbaxis_core::config::{AxisRangeSpec, RunConfig};
use thumbaxis_core::grasp::is_valid_grasp;
use thumbaxis_core::optimizer::{evaluate_one, optimize, score, Evaluator, OptimizeError, OptimizeOptions, Problem};
use thumbaxis_core::oracle::oracle_optimize;

fn problem(steps: usize) -> Problem {
    let mut cfg = RunConfig::reference();
    cfg.grid = cfg.grid.with_uniform_steps(steps);
    cfg.build(Path::new(".")).unwrap()
}

fn opts(workers: usize, chunk: u64) -> OptimizeOptions {
    OptimizeOptions { workers, chunk_size: chunk, ..Default::default() }
}

#[test]
fn matches_sequential_reference() {
    let p = problem(3);
    let res = optimize(&p, &OptimizeOptions::default()).unwrap();
    let seq = oracle_optimize(&p);
    assert_eq!(res.valid_count, seq.valid_count);
    assert_eq!(res.omega_opt.as_ref().map(|o| o.index), seq.omega_index);
    assert_eq!(res.omega_opt.map(|o| o.interval), seq.omega_index.map(|_| seq.interval));
    assert_eq!(res.evaluated_count, 729);
    assert!(res.complete);
}

#[test]
fn worker_count_and_chunking_do_not_change_outcome() {
    let p = problem(5);
    let base = optimize(&p, &opts(1, 2048)).unwrap().outcome();
    assert!(base.valid_count > 0, "reference grid has no valid configuration");
    for (w, c) in [(4, 2048), (8, 2048), (3, 1), (2, 37), (8, 10_000)] {
        assert_eq!(optimize(&p, &opts(w, c)).unwrap().outcome(), base, "workers={w} chunk={c}");
    }
}

#[test]
fn pruning_never_drops_a_valid_configuration() {
    let p = problem(5);
    let pruned = Evaluator::new(&p, true);
    let plain = Evaluator::new(&p, false);
    let mut scratch = Vec::new();
    let mut rejected = 0;
    for (_, cfg) in p.grid.enumerate() {
        p.hand.thumb_points(&cfg, &mut scratch);
        if pruned.pruned(&scratch) {
            rejected += 1;
            assert!(!is_valid_grasp(&cfg, &p.hand, &p.req).precision_ok);
        }
        assert_eq!(pruned.evaluate(&cfg, &mut scratch), plain.evaluate(&cfg, &mut scratch));
    }
    assert!(rejected > 0, "bound never fires on the reference grid");
    let a = optimize(&p, &OptimizeOptions { prune: false, ..Default::default() }).unwrap();
    let b = optimize(&p, &OptimizeOptions::default()).unwrap();
    assert_eq!((a.valid_count, a.omega_opt), (b.valid_count, b.omega_opt));
}

#[test]
fn fast_evaluation_matches_full_check() {
    let p = problem(4);
    let eval = Evaluator::new(&p, false);
    let mut scratch = Vec::new();
    for (_, cfg) in p.grid.enumerate() {
        let (verdict, w) = evaluate_one(&cfg, &p.hand, &p.req, p.delta_m);
        let fast = eval.evaluate(&cfg, &mut scratch);
        assert_eq!(verdict.is_valid(), fast.is_some());
        if let Some(f) = fast {
            assert_eq!(f.is_empty(), w.is_empty());
            if !w.is_empty() {
                assert_eq!(f, w);
            }
        }
    }
}

#[test]
fn top_k_is_sorted_and_sound() {
    let p = problem(5);
    let res = optimize(&p, &OptimizeOptions { top_k: 25, ..Default::default() }).unwrap();
    assert_eq!(res.top_k.len() as u64, res.valid_count.min(25));
    for pair in res.top_k.windows(2) {
        let (a, b) = (score(&pair[0].interval), score(&pair[1].interval));
        assert!(a > b || (a == b && pair[0].index < pair[1].index));
    }
    for r in &res.top_k {
        assert!(is_valid_grasp(&r.config, &p.hand, &p.req).is_valid());
        assert_eq!(p.grid.linear(r.grid_indices), r.index);
    }
    assert_eq!(res.omega_opt.as_ref(), res.top_k.first());
    assert_eq!(res.w_max, res.omega_opt.unwrap().width);
}

#[test]
fn interrupted_run_resumes_to_the_same_result() {
    let p = problem(5);
    let dir = tempfile::tempdir().unwrap();
    let cp = dir.path().join("scan.checkpoint.json");
    let base = optimize(&p, &opts(2, 64)).unwrap().outcome();
    let with_cp = |stop: Option<u64>| OptimizeOptions {
        workers: 2,
        chunk_size: 64,
        checkpoint: Some(cp.clone()),
        checkpoint_every: 500,
        stop_after: stop,
        ..Default::default()
    };
    let first = optimize(&p, &with_cp(Some(1200))).unwrap();
    assert!(!first.complete);
    let second = optimize(&p, &with_cp(Some(900))).unwrap();
    assert!(!second.complete);
    assert!(second.runtime.resumed_at.is_some());
    let last = optimize(&p, &with_cp(None)).unwrap();
    assert!(last.complete);
    assert_eq!(last.outcome(), base);
}

#[test]
fn checkpoint_for_another_problem_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cp = dir.path().join("scan.json");
    let o = OptimizeOptions { checkpoint: Some(cp.clone()), stop_after: Some(10), ..Default::default() };
    optimize(&problem(3), &o).unwrap();
    let err = optimize(&problem(4), &o).unwrap_err();
    assert!(matches!(err, OptimizeError::Checkpoint { .. }), "{err}");
    let err = optimize(&problem(3), &OptimizeOptions { top_k: 3, ..o.clone() }).unwrap_err();
    assert!(matches!(err, OptimizeError::Checkpoint { .. }), "{err}");
    std::fs::write(&cp, "not json").unwrap();
    assert!(optimize(&problem(3), &o).is_err());
}

#[test]
fn far_away_grid_is_infeasible() {
    let mut cfg = RunConfig::reference();
    cfg.grid = cfg.grid.with_uniform_steps(3);
    cfg.grid.x_mm = AxisRangeSpec { range: [900.0, 1000.0], steps: 3 };
    let p = cfg.build(Path::new(".")).unwrap();
    let res = optimize(&p, &OptimizeOptions::default()).unwrap();
    assert_eq!(res.valid_count, 0);
    assert!(res.omega_opt.is_none() && res.top_k.is_empty());
    assert_eq!(res.w_max, 0.0);
}

#[test]
fn winner_survives_as_a_single_point_grid() {
    let p = problem(5);
    let best = optimize(&p, &OptimizeOptions::default()).unwrap().omega_opt.unwrap();
    let mut cfg = RunConfig::reference();
    let v = best.config_mm_deg;
    let g = &mut cfg.grid;
    for (axis, value) in [&mut g.x_mm, &mut g.y_mm, &mut g.z_mm, &mut g.roll_deg, &mut g.pitch_deg, &mut g.yaw_deg].into_iter().zip(v) {
        *axis = AxisRangeSpec { range: [value, value], steps: 1 };
    }
    let single = cfg.build(Path::new(".")).unwrap();
    let res = optimize(&single, &OptimizeOptions::default()).unwrap();
    assert_eq!(res.valid_count, 1);
    let w = res.omega_opt.unwrap().interval;
    assert!((w.lo - best.interval.lo).abs() < 1e-9 && (w.hi - best.interval.hi).abs() < 1e-9);
}

#[test]
fn hash_tracks_inputs() {
    let a = problem(3).hash();
    assert_eq!(a, problem(3).hash());
    assert_ne!(a, problem(4).hash());
    let mut cfg = RunConfig::reference();
    cfg.grid = cfg.grid.with_uniform_steps(3);
    cfg.requirements.alpha_perm_deg += 1.0;
    assert_ne!(a, cfg.build(Path::new(".")).unwrap().hash());
    let mut cfg = RunConfig::reference();
    cfg.grid = cfg.grid.with_uniform_steps(3);
    cfg.hand.radii_mm.thumb += 0.5;
    assert_ne!(a, cfg.build(Path::new(".")).unwrap().hash());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn any_partition_gives_the_same_outcome(workers in 1usize..6, chunk in 1u64..400, stop in 1u64..700) {
        let p = problem(3);
        let base = optimize(&p, &OptimizeOptions::default()).unwrap().outcome();
        let dir = tempfile::tempdir().unwrap();
        let cp = dir.path().join("c.json");
        let o = OptimizeOptions {
            workers,
            chunk_size: chunk,
            checkpoint: Some(cp),
            checkpoint_every: 50,
            stop_after: Some(stop),
            ..Default::default()
        };
        let part = optimize(&p, &o).unwrap();
        prop_assert!(part.evaluated_count >= stop.min(729));
        let full = optimize(&p, &OptimizeOptions { stop_after: None, ..o }).unwrap();
        prop_assert_eq!(full.outcome(), base);
    }
}
