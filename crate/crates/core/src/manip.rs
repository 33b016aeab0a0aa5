//! Precision-lateral transition analysis and the manipulable width interval.
//!
//! For each held index pose the thumb sweeps from the last pose that still
//! establishes a lateral grasp to the first pose that establishes a precision
//! grasp. An object of width `w` survives the sweep when, at every step, the
//! fingertip surface gap is at most `w` and at least `w - 2 delta_m`, with
//! `delta_m` the maximum elastic deformation of one fingertip.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{AxisConfig, Point3};
use crate::grasp::{lateral_established, precision_established, GraspRequirements, Thresholds};
use crate::hand::HandModel;
use crate::kinematics::{Trajectory, TrajectorySample};

#[derive(Debug, Error, PartialEq)]
pub enum ManipError {
    #[error("pinch force and Young's modulus must be positive (got F = {force} N, E = {modulus} Pa)")]
    NonPositive { force: f64, modulus: f64 },
}

/// Maximum fingertip deformation `sqrt(F / (pi E))`, returned in mm.
pub fn delta_m(force_n: f64, youngs_modulus_pa: f64) -> Result<f64, ManipError> {
    if !(force_n > 0.0 && youngs_modulus_pa > 0.0) || !force_n.is_finite() || !youngs_modulus_pa.is_finite() {
        return Err(ManipError::NonPositive { force: force_n, modulus: youngs_modulus_pa });
    }
    Ok((force_n / (PI * youngs_modulus_pa)).sqrt() * 1000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformationModel {
    pub pinch_force_n: f64,
    pub youngs_modulus_pa: f64,
}

impl DeformationModel {
    /// 10 N pinch on 134.3 kPa fingertip silicone.
    pub fn reference() -> Self {
        Self { pinch_force_n: 10.0, youngs_modulus_pa: 134.3e3 }
    }

    pub fn delta_m(&self) -> Result<f64, ManipError> {
        delta_m(self.pinch_force_n, self.youngs_modulus_pa)
    }
}

/// Closed interval of object widths (mm), possibly empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthInterval {
    pub lo: f64,
    pub hi: f64,
    pub empty: bool,
}

impl WidthInterval {
    pub const EMPTY: Self = Self { lo: 0.0, hi: 0.0, empty: true };

    /// `[lo, hi]`, or empty when `lo > hi`.
    pub fn new(lo: f64, hi: f64) -> Self {
        if lo <= hi {
            Self { lo, hi, empty: false }
        } else {
            Self::EMPTY
        }
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    /// Interval length; zero when empty.
    pub fn width(&self) -> f64 {
        if self.empty {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        if self.empty || other.empty {
            return Self::EMPTY;
        }
        Self::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// Drops negative widths.
    pub fn clip_nonnegative(&self) -> Self {
        if self.empty {
            return Self::EMPTY;
        }
        Self::new(self.lo.max(0.0), self.hi)
    }

    pub fn contains(&self, w: f64) -> bool {
        !self.empty && self.lo <= w && w <= self.hi
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.empty || (!other.empty && other.lo <= self.lo && self.hi <= other.hi)
    }
}

/// Distance between an index fingertip centre and a thumb fingertip centre.
#[inline]
fn tip_distance(index: &Point3, thumb: &TrajectorySample) -> f64 {
    (index - thumb.center).norm()
}

/// `(j_lateral, j_precision)` for one index pose: the last thumb step that
/// establishes a lateral grasp and the first step at or after it that
/// establishes a precision grasp.
pub fn critical_points(
    thumb: &[TrajectorySample],
    index: &TrajectorySample,
    req: &GraspRequirements,
) -> Option<(usize, usize)> {
    critical_points_with(thumb, index, &Thresholds::new(req))
}

fn critical_points_with(thumb: &[TrajectorySample], index: &TrajectorySample, th: &Thresholds) -> Option<(usize, usize)> {
    let j_lateral = thumb.iter().rposition(|t| lateral_established(t, index, th))?;
    let j_precision = thumb[j_lateral..].iter().position(|t| precision_established(t, index, th))? + j_lateral;
    Some((j_lateral, j_precision))
}

/// Width interval for one index pose over the transition steps `j_range`,
/// before clipping. Returns the interval with the extreme distances.
pub fn width_interval(
    thumb: &[TrajectorySample],
    index_pos: &Point3,
    j_range: RangeInclusive<usize>,
    radii_sum: f64,
    delta_m: f64,
) -> (WidthInterval, f64, f64) {
    let mut d_max = f64::NEG_INFINITY;
    let mut d_min = f64::INFINITY;
    for t in &thumb[j_range] {
        let d = tip_distance(index_pos, t);
        d_max = d_max.max(d);
        d_min = d_min.min(d);
    }
    let interval = WidthInterval::new(d_max - radii_sum, d_min - radii_sum + 2.0 * delta_m);
    (interval, d_max, d_min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexTransition {
    pub index_sample: usize,
    /// `(j_lateral, j_precision)`, absent when either pose is missing.
    pub critical: Option<(usize, usize)>,
    pub d_max: Option<f64>,
    pub d_min: Option<f64>,
    pub interval: WidthInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionAnalysis {
    pub per_index: Vec<IndexTransition>,
    /// Intersection over all index poses, clipped to non-negative widths.
    pub overall: WidthInterval,
    pub delta_m: f64,
}

fn index_transition(
    thumb: &[TrajectorySample],
    index: &TrajectorySample,
    radii_sum: f64,
    delta_m: f64,
    th: &Thresholds,
) -> (Option<(usize, usize)>, Option<(f64, f64)>, WidthInterval) {
    match critical_points_with(thumb, index, th) {
        None => (None, None, WidthInterval::EMPTY),
        Some((jl, jp)) => {
            let (w, d_max, d_min) = width_interval(thumb, &index.center, jl..=jp, radii_sum, delta_m);
            (Some((jl, jp)), Some((d_max, d_min)), w)
        }
    }
}

/// Transition analysis with per-index records for a placed thumb.
pub fn transition_analysis(
    thumb: &[TrajectorySample],
    manipulation_index: &[TrajectorySample],
    radii_sum: f64,
    req: &GraspRequirements,
    delta_m: f64,
) -> TransitionAnalysis {
    let th = Thresholds::new(req);
    let mut overall: Option<WidthInterval> = None;
    let mut per_index = Vec::with_capacity(manipulation_index.len());
    for (i, index) in manipulation_index.iter().enumerate() {
        let (critical, d, interval) = index_transition(thumb, index, radii_sum, delta_m, &th);
        overall = Some(match overall {
            None => interval,
            Some(w) => w.intersect(&interval),
        });
        per_index.push(IndexTransition {
            index_sample: i,
            critical,
            d_max: d.map(|v| v.0),
            d_min: d.map(|v| v.1),
            interval,
        });
    }
    let overall = overall.unwrap_or(WidthInterval::EMPTY).clip_nonnegative();
    TransitionAnalysis { per_index, overall, delta_m }
}

/// Overall width interval only; stops at the first empty intersection.
pub fn manipulation_width(
    thumb: &[TrajectorySample],
    manipulation_index: &[TrajectorySample],
    radii_sum: f64,
    req: &GraspRequirements,
    delta_m: f64,
) -> WidthInterval {
    let th = Thresholds::new(req);
    let mut overall: Option<WidthInterval> = None;
    for index in manipulation_index {
        let (_, _, interval) = index_transition(thumb, index, radii_sum, delta_m, &th);
        let w = match overall {
            None => interval,
            Some(w) => w.intersect(&interval),
        };
        if w.is_empty() {
            return WidthInterval::EMPTY;
        }
        overall = Some(w);
    }
    overall.unwrap_or(WidthInterval::EMPTY).clip_nonnegative()
}

pub fn manipulation_range(cfg: &AxisConfig, hand: &HandModel, req: &GraspRequirements, delta_m: f64) -> TransitionAnalysis {
    let thumb = hand.thumb_trajectory(cfg);
    transition_analysis(
        thumb.samples(),
        hand.manipulation_index.samples(),
        hand.radii.thumb + hand.radii.index,
        req,
        delta_m,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub index_sample: usize,
    pub j: usize,
    pub distance: f64,
    /// Fingertip surface gap `d - (r_T + r_I)`.
    pub gap: f64,
    pub hold_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub width: f64,
    /// Every index pose has both a lateral and a precision thumb pose.
    pub capable: bool,
    pub pass: bool,
    pub overall: WidthInterval,
    pub rows: Vec<TransitionRow>,
}

/// Tolerance on the hold test so that interval endpoints themselves pass.
pub const HOLD_TOL_MM: f64 = 1e-9;

/// Step-by-step check that an object of `width` stays held through every
/// index pose's transition.
pub fn transition_report(
    thumb: &Trajectory,
    hand: &HandModel,
    req: &GraspRequirements,
    delta_m: f64,
    width: f64,
) -> TransitionReport {
    let radii_sum = hand.radii.thumb + hand.radii.index;
    let analysis = transition_analysis(thumb.samples(), hand.manipulation_index.samples(), radii_sum, req, delta_m);
    let mut rows = Vec::new();
    let mut capable = true;
    for (rec, index) in analysis.per_index.iter().zip(hand.manipulation_index.samples()) {
        let Some((jl, jp)) = rec.critical else {
            capable = false;
            continue;
        };
        for j in jl..=jp {
            let distance = tip_distance(&index.center, &thumb.samples()[j]);
            let gap = distance - radii_sum;
            let hold_ok = gap <= width + HOLD_TOL_MM && width <= gap + 2.0 * delta_m + HOLD_TOL_MM;
            rows.push(TransitionRow { index_sample: rec.index_sample, j, distance, gap, hold_ok });
        }
    }
    let pass = capable && rows.iter().all(|r| r.hold_ok);
    TransitionReport { width, capable, pass, overall: analysis.overall, rows }
}
