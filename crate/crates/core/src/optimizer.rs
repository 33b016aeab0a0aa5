//! Exhaustive search over thumb axis placements.
//!
//! Every grid configuration is validated and, when valid, scored by the
//! width of its manipulable interval. Work is split into fixed chunks of the
//! linear index range; chunk results are merged in chunk order so the result
//! does not depend on the worker count.

use std::cmp::Ordering;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::Discretization;
use crate::geom::{AxisConfig, Point3};
use crate::grasp::{grasp_valid_fast, is_valid_grasp, GraspRequirements, GraspVerdict};
use crate::hand::HandModel;
use crate::kinematics::Trajectory;
use crate::manip::{manipulation_range, manipulation_width, WidthInterval};

pub const RESULT_SCHEMA_VERSION: u32 = 1;
pub const CHECKPOINT_FORMAT: &str = "thumbaxis-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("grid axis {axis} has zero steps")]
    EmptyAxis { axis: usize },
    #[error("grid axis {axis} has a non-finite bound")]
    NonFiniteAxis { axis: usize },
    #[error("grid size overflows u64")]
    Overflow,
    #[error("worker count must be at least 1")]
    Workers,
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridDim {
    X,
    Y,
    Z,
    Roll,
    Pitch,
    Yaw,
}

impl GridDim {
    pub const ALL: [GridDim; 6] = [GridDim::X, GridDim::Y, GridDim::Z, GridDim::Roll, GridDim::Pitch, GridDim::Yaw];

    pub fn position(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["x", "y", "z", "roll", "pitch", "yaw"][self as usize]
    }

    /// Whether the dimension is an angle (internally radians).
    pub fn is_angle(self) -> bool {
        self.position() >= 3
    }
}

/// One grid dimension in internal units (mm or rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl GridAxis {
    /// Inclusive linspace; a single step sits at the midpoint.
    pub fn value(&self, k: usize) -> f64 {
        if self.steps == 1 {
            0.5 * (self.lo + self.hi)
        } else {
            self.lo + (self.hi - self.lo) * k as f64 / (self.steps - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    axes: [GridAxis; 6],
    total: u64,
}

impl SearchGrid {
    pub fn new(axes: [GridAxis; 6]) -> Result<Self, OptimizeError> {
        let mut total = 1u64;
        for (axis, a) in axes.iter().enumerate() {
            if a.steps == 0 {
                return Err(OptimizeError::EmptyAxis { axis });
            }
            if !(a.lo.is_finite() && a.hi.is_finite()) {
                return Err(OptimizeError::NonFiniteAxis { axis });
            }
            total = total.checked_mul(a.steps as u64).ok_or(OptimizeError::Overflow)?;
        }
        Ok(Self { axes, total })
    }

    pub fn axes(&self) -> &[GridAxis; 6] {
        &self.axes
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Per-dimension indices, x slowest and yaw fastest.
    pub fn indices(&self, linear: u64) -> [usize; 6] {
        debug_assert!(linear < self.total);
        let mut rest = linear;
        let mut idx = [0usize; 6];
        for d in (0..6).rev() {
            let n = self.axes[d].steps as u64;
            idx[d] = (rest % n) as usize;
            rest /= n;
        }
        idx
    }

    pub fn linear(&self, idx: [usize; 6]) -> u64 {
        idx.iter().zip(&self.axes).fold(0u64, |acc, (&k, a)| acc * a.steps as u64 + k as u64)
    }

    pub fn config_from_indices(&self, idx: [usize; 6]) -> AxisConfig {
        let v: [f64; 6] = std::array::from_fn(|d| self.axes[d].value(idx[d]));
        AxisConfig::new(Point3::new(v[0], v[1], v[2]), v[3], v[4], v[5])
    }

    pub fn config_at(&self, linear: u64) -> AxisConfig {
        self.config_from_indices(self.indices(linear))
    }

    pub fn enumerate(&self) -> impl Iterator<Item = (u64, AxisConfig)> + '_ {
        (0..self.total).map(move |i| (i, self.config_at(i)))
    }
}

/// Everything a search needs: the discretized hand, the requirements, the
/// deformation allowance and the grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub hand: HandModel,
    pub req: GraspRequirements,
    pub delta_m: f64,
    pub grid: SearchGrid,
    pub discretization: Discretization,
}

impl Problem {
    /// SHA-256 over every input that can change a search outcome.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |x: f64| h.update(x.to_bits().to_le_bytes());
        for a in self.grid.axes() {
            put(a.lo);
            put(a.hi);
            put(a.steps as f64);
        }
        let r = &self.req;
        for range in [r.precision, r.lateral, r.tripod, r.manipulation_width] {
            put(range.lo);
            put(range.hi);
        }
        put(r.theta_min);
        put(r.alpha_perm);
        put(r.force_dir_limit);
        put(self.delta_m);
        let radii = self.hand.radii;
        put(radii.thumb);
        put(radii.index);
        put(radii.middle);
        let tip = self.hand.thumb.tip();
        put(tip.radial);
        put(tip.axial);
        put(tip.phase);
        put(self.hand.thumb.angles().len() as f64);
        for &a in self.hand.thumb.angles() {
            put(a);
        }
        for traj in [&self.hand.index, &self.hand.middle, &self.hand.manipulation_index] {
            put(traj.len() as f64);
            for s in traj.samples() {
                for v in [s.center.coords, s.tangent.into_inner(), s.pad_normal.into_inner(), s.side_normal.into_inner()] {
                    put(v.x);
                    put(v.y);
                    put(v.z);
                }
            }
        }
        drop(put);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Full evaluation with diagnostics; the interval is empty for invalid configurations.
pub fn evaluate_one(cfg: &AxisConfig, hand: &HandModel, req: &GraspRequirements, delta_m: f64) -> (GraspVerdict, WidthInterval) {
    let verdict = is_valid_grasp(cfg, hand, req);
    let interval = if verdict.is_valid() {
        manipulation_range(cfg, hand, req, delta_m).overall
    } else {
        WidthInterval::EMPTY
    };
    (verdict, interval)
}

/// Cheap rejection test, then short-circuiting validation.
pub struct Evaluator<'a> {
    hand: &'a HandModel,
    req: &'a GraspRequirements,
    delta_m: f64,
    prune: Option<(Point3, f64)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a Problem, prune: bool) -> Self {
        Self::for_parts(&problem.hand, &problem.req, problem.delta_m, prune)
    }

    pub fn for_parts(hand: &'a HandModel, req: &'a GraspRequirements, delta_m: f64, prune: bool) -> Self {
        let prune = prune.then(|| {
            let (c, r) = hand.index.bounding_sphere();
            // A precision grasp needs an index pair whose minimum object fits the lower bound.
            let reach = hand.radii.thumb + hand.radii.index + 2.0 * req.precision.lo.max(0.0);
            (c, r + reach)
        });
        Self { hand, req, delta_m, prune }
    }

    /// True when the thumb path stays too far from the index finger for any precision grasp.
    pub fn pruned(&self, thumb_points: &[Point3]) -> bool {
        match self.prune {
            Some((c, limit)) => thumb_points.iter().all(|p| (p - c).norm() > limit),
            None => false,
        }
    }

    /// `None` when invalid, otherwise the overall width interval.
    pub fn evaluate(&self, cfg: &AxisConfig, scratch: &mut Vec<Point3>) -> Option<WidthInterval> {
        if self.prune.is_some() {
            self.hand.thumb_points(cfg, scratch);
            if self.pruned(scratch) {
                return None;
            }
        }
        let thumb: Trajectory = self.hand.thumb_trajectory(cfg);
        if !grasp_valid_fast(thumb.samples(), self.hand, self.req) {
            return None;
        }
        Some(manipulation_width(
            thumb.samples(),
            self.hand.manipulation_index.samples(),
            self.hand.radii.thumb + self.hand.radii.index,
            self.req,
            self.delta_m,
        ))
    }
}

/// A valid configuration with its interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub index: u64,
    pub interval: WidthInterval,
}

/// Ranking score: interval width, with empty intervals below every non-empty one.
pub fn score(w: &WidthInterval) -> f64 {
    if w.is_empty() {
        -1.0
    } else {
        w.width()
    }
}

/// Best first: larger score, then lower linear index.
pub fn rank(a: &Scored, b: &Scored) -> Ordering {
    score(&b.interval).total_cmp(&score(&a.interval)).then(a.index.cmp(&b.index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanState {
    pub next_index: u64,
    pub evaluated: u64,
    pub valid: u64,
    /// Best first, at most `capacity` entries.
    pub top: Vec<Scored>,
}

impl ScanState {
    fn new() -> Self {
        Self { next_index: 0, evaluated: 0, valid: 0, top: Vec::new() }
    }

    fn offer(&mut self, s: Scored, capacity: usize) {
        if self.top.len() == capacity && rank(&s, self.top.last().expect("non-empty")) != Ordering::Less {
            return;
        }
        let pos = self.top.partition_point(|t| rank(t, &s) == Ordering::Less);
        self.top.insert(pos, s);
        self.top.truncate(capacity);
    }

    fn absorb(&mut self, other: ScanState, capacity: usize) {
        self.evaluated += other.evaluated;
        self.valid += other.valid;
        self.next_index = self.next_index.max(other.next_index);
        for s in other.top {
            self.offer(s, capacity);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    problem_hash: String,
    total: u64,
    capacity: usize,
    state: ScanState,
}

pub type ProgressFn = Arc<dyn Fn(u64, u64) + Send + Sync>;

#[derive(Clone)]
pub struct OptimizeOptions {
    pub workers: usize,
    pub top_k: usize,
    /// Configurations per work unit; part of the partition, not of the result.
    pub chunk_size: u64,
    pub checkpoint: Option<PathBuf>,
    /// Configurations between checkpoint writes.
    pub checkpoint_every: u64,
    /// Resume from `checkpoint` when it exists.
    pub resume: bool,
    /// Stop once at least this many configurations are done (simulated interruption).
    pub stop_after: Option<u64>,
    pub prune: bool,
    pub progress: Option<ProgressFn>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            top_k: 10,
            chunk_size: 2048,
            checkpoint: None,
            checkpoint_every: 1 << 20,
            resume: true,
            stop_after: None,
            prune: true,
            progress: None,
        }
    }
}

impl std::fmt::Debug for OptimizeOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OptimizeOptions")
            .field("workers", &self.workers)
            .field("top_k", &self.top_k)
            .field("chunk_size", &self.chunk_size)
            .field("checkpoint", &self.checkpoint)
            .field("checkpoint_every", &self.checkpoint_every)
            .field("resume", &self.resume)
            .field("stop_after", &self.stop_after)
            .field("prune", &self.prune)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedConfig {
    pub index: u64,
    pub grid_indices: [usize; 6],
    pub config: AxisConfig,
    /// (x, y, z, roll, pitch, yaw) in mm and degrees.
    pub config_mm_deg: [f64; 6],
    pub interval: WidthInterval,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub problem_hash: String,
    pub grid: SearchGrid,
    pub grid_total: u64,
    pub discretization: Discretization,
    pub requirements: GraspRequirements,
    pub delta_m: f64,
    pub pruning: bool,
    pub notes: Vec<String>,
}

/// Facts about the run that cannot influence the outcome.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuntimeInfo {
    pub workers: usize,
    pub wall_time_s: f64,
    pub configs_per_s: f64,
    pub resumed_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub schema_version: u32,
    /// False when the run stopped before the end of the grid.
    pub complete: bool,
    pub omega_opt: Option<RankedConfig>,
    pub w_max: f64,
    pub valid_count: u64,
    pub evaluated_count: u64,
    pub top_k: Vec<RankedConfig>,
    pub metadata: RunMetadata,
    pub runtime: RuntimeInfo,
}

impl OptimizationResult {
    /// The result without runtime facts, for equality checks across runs.
    pub fn outcome(&self) -> Self {
        Self { runtime: RuntimeInfo::default(), ..self.clone() }
    }
}

pub fn ranked_config(grid: &SearchGrid, s: &Scored) -> RankedConfig {
    let config = grid.config_at(s.index);
    RankedConfig {
        index: s.index,
        grid_indices: grid.indices(s.index),
        config,
        config_mm_deg: config.to_mm_deg(),
        interval: s.interval,
        width: s.interval.width(),
    }
}

fn scan_chunk(eval: &Evaluator, grid: &SearchGrid, start: u64, end: u64, capacity: usize) -> ScanState {
    let mut state = ScanState::new();
    let mut scratch = Vec::new();
    for index in start..end {
        let cfg = grid.config_at(index);
        if let Some(interval) = eval.evaluate(&cfg, &mut scratch) {
            state.valid += 1;
            state.offer(Scored { index, interval }, capacity);
        }
    }
    state.evaluated = end - start;
    state.next_index = end;
    state
}

fn load_checkpoint(path: &Path, hash: &str, total: u64, capacity: usize) -> Result<Option<ScanState>, OptimizeError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let bad = |message: String| OptimizeError::Checkpoint { path: path.to_path_buf(), message };
    let cp: CheckpointFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if cp.format != CHECKPOINT_FORMAT || cp.version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported format {} v{}", cp.format, cp.version)));
    }
    if cp.problem_hash != hash || cp.total != total {
        return Err(bad("written for a different problem".into()));
    }
    if cp.capacity != capacity {
        return Err(bad(format!("written with top-k {}, requested {}", cp.capacity, capacity)));
    }
    if cp.state.next_index > total {
        return Err(bad("next index beyond grid".into()));
    }
    Ok(Some(cp.state))
}

fn save_checkpoint(path: &Path, hash: &str, total: u64, capacity: usize, state: &ScanState) -> Result<(), OptimizeError> {
    let cp = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        problem_hash: hash.into(),
        total,
        capacity,
        state: state.clone(),
    };
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(serde_json::to_string(&cp).expect("checkpoint serializes").as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs the search. The outcome is identical for any worker count, chunk
/// size, and any sequence of interruptions resumed from a checkpoint.
pub fn optimize(problem: &Problem, options: &OptimizeOptions) -> Result<OptimizationResult, OptimizeError> {
    if options.workers == 0 {
        return Err(OptimizeError::Workers);
    }
    let started = Instant::now();
    let grid = &problem.grid;
    let total = grid.total();
    let capacity = options.top_k.max(1);
    let hash = problem.hash();
    let chunk = options.chunk_size.max(1);

    let mut state = ScanState::new();
    let mut resumed_at = None;
    if let (Some(path), true) = (&options.checkpoint, options.resume) {
        if let Some(s) = load_checkpoint(path, &hash, total, capacity)? {
            resumed_at = Some(s.next_index);
            state = s;
        }
    }
    let first = state.next_index;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| OptimizeError::Pool(e.to_string()))?;
    let eval = Evaluator::new(problem, options.prune);
    let block = options.checkpoint_every.max(chunk);
    let limit = options.stop_after.map_or(total, |n| first.saturating_add(n).min(total));

    while state.next_index < limit {
        let start = state.next_index;
        let end = start.saturating_add(block).min(limit);
        let starts: Vec<u64> = (start..end).step_by(chunk as usize).collect();
        let parts: Vec<ScanState> = pool.install(|| {
            starts
                .par_iter()
                .map(|&s| scan_chunk(&eval, grid, s, (s + chunk).min(end), capacity))
                .collect()
        });
        for p in parts {
            state.absorb(p, capacity);
        }
        if let Some(path) = &options.checkpoint {
            save_checkpoint(path, &hash, total, capacity, &state)?;
        }
        if let Some(progress) = &options.progress {
            progress(state.next_index, total);
        }
    }

    let elapsed = started.elapsed().as_secs_f64();
    let done = state.next_index - first;
    let top_k: Vec<RankedConfig> = state.top.iter().take(options.top_k).map(|s| ranked_config(grid, s)).collect();
    let omega_opt = state.top.first().map(|s| ranked_config(grid, s));
    let w_max = omega_opt.as_ref().map_or(0.0, |o| o.width);
    Ok(OptimizationResult {
        schema_version: RESULT_SCHEMA_VERSION,
        complete: state.next_index == total,
        omega_opt,
        w_max,
        valid_count: state.valid,
        evaluated_count: state.evaluated,
        top_k,
        metadata: RunMetadata {
            problem_hash: hash,
            grid: grid.clone(),
            grid_total: total,
            discretization: problem.discretization,
            requirements: problem.req,
            delta_m: problem.delta_m,
            pruning: options.prune,
            notes: vec![
                "grid bounds and step counts are hand-size-relative modelling defaults, not values from a physical device".into(),
                "angles in `config` are radians; `config_mm_deg` holds mm and degrees".into(),
            ],
        },
        runtime: RuntimeInfo {
            workers: options.workers,
            wall_time_s: elapsed,
            configs_per_s: if elapsed > 0.0 { done as f64 / elapsed } else { 0.0 },
            resumed_at,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(lo: f64, hi: f64, steps: usize) -> GridAxis {
        GridAxis { lo, hi, steps }
    }

    #[test]
    fn singleton_grid_is_the_midpoint() {
        let g = SearchGrid::new([axis(0.0, 10.0, 1), axis(2.0, 4.0, 1), axis(-1.0, 1.0, 1), axis(0.0, 1.0, 1), axis(0.0, 0.5, 1), axis(-1.0, 0.0, 1)])
            .unwrap();
        assert_eq!(g.total(), 1);
        let c = g.config_at(0);
        assert_eq!(c.origin, Point3::new(5.0, 3.0, 0.0));
        assert_eq!((c.roll, c.pitch, c.yaw), (0.5, 0.25, -0.5));
    }

    #[test]
    fn two_by_one_differs_in_x_only() {
        let g = SearchGrid::new([axis(0.0, 10.0, 2), axis(0.0, 1.0, 1), axis(0.0, 1.0, 1), axis(0.0, 1.0, 1), axis(0.0, 1.0, 1), axis(0.0, 1.0, 1)])
            .unwrap();
        let cfgs: Vec<_> = g.enumerate().map(|(_, c)| c).collect();
        assert_eq!(cfgs.len(), 2);
        assert_eq!(cfgs[0].origin.x, 0.0);
        assert_eq!(cfgs[1].origin.x, 10.0);
        assert_eq!(cfgs[0].origin.y, cfgs[1].origin.y);
        assert_eq!(cfgs[0].yaw, cfgs[1].yaw);
    }

    #[test]
    fn full_scale_factorization() {
        let steps = [20, 20, 20, 8, 15, 20];
        let g = SearchGrid::new(std::array::from_fn(|d| axis(0.0, 1.0, steps[d]))).unwrap();
        assert_eq!(g.total(), 19_200_000);
    }

    #[test]
    fn row_major_bijection() {
        let steps = [3, 1, 4, 2, 5, 3];
        let g = SearchGrid::new(std::array::from_fn(|d| axis(0.0, 1.0, steps[d]))).unwrap();
        let mut prev = None;
        for i in 0..g.total() {
            let idx = g.indices(i);
            assert_eq!(g.linear(idx), i);
            if let Some(p) = prev {
                assert!(idx > p, "lexicographic order with yaw fastest");
            }
            prev = Some(idx);
        }
        assert_eq!(g.indices(1), [0, 0, 0, 0, 0, 1]);
    }

    #[test]
    fn rejects_bad_grids() {
        let mut axes = [axis(0.0, 1.0, 2); 6];
        axes[4].steps = 0;
        assert!(matches!(SearchGrid::new(axes), Err(OptimizeError::EmptyAxis { axis: 4 })));
        let axes = [axis(0.0, 1.0, 1 << 20); 6];
        assert!(matches!(SearchGrid::new(axes), Err(OptimizeError::Overflow)));
        let mut axes = [axis(0.0, 1.0, 2); 6];
        axes[0].hi = f64::NAN;
        assert!(SearchGrid::new(axes).is_err());
    }

    #[test]
    fn ranking_prefers_width_then_low_index() {
        let a = Scored { index: 5, interval: WidthInterval::new(0.0, 3.0) };
        let b = Scored { index: 2, interval: WidthInterval::new(10.0, 13.0) };
        let c = Scored { index: 1, interval: WidthInterval::new(0.0, 1.0) };
        let e = Scored { index: 0, interval: WidthInterval::EMPTY };
        let z = Scored { index: 9, interval: WidthInterval::new(4.0, 4.0) };
        let mut st = ScanState::new();
        for s in [a, b, c, e, z] {
            st.offer(s, 10);
        }
        let order: Vec<u64> = st.top.iter().map(|s| s.index).collect();
        assert_eq!(order, vec![2, 5, 1, 9, 0]);
        let mut small = ScanState::new();
        for s in [e, z, c, a, b] {
            small.offer(s, 2);
        }
        assert_eq!(small.top, vec![b, a]);
    }

    #[test]
    fn shifting_intervals_keeps_ranking() {
        let items: Vec<Scored> = (0..20)
            .map(|i| Scored { index: i, interval: WidthInterval::new(i as f64 * 0.25, i as f64 * 0.25 + ((i * 7) % 5) as f64) })
            .collect();
        let best = |shift: f64| {
            let mut st = ScanState::new();
            for s in &items {
                let iv = WidthInterval::new(s.interval.lo + shift, s.interval.hi + shift);
                st.offer(Scored { index: s.index, interval: iv }, 1);
            }
            st.top[0].index
        };
        assert_eq!(best(0.0), best(8.0));
    }
}
