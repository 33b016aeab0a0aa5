//! Grasp validation for a thumb axis placement: precision (pulp pinch),
//! lateral (key pinch) and tripod feasibility over the sampled finger motion.
//!
//! A pair of thumb and index samples *establishes* a two-finger grasp when the
//! index reference normal lies within `alpha_perm` of the grasp direction
//! `c_T - c_I` and the force-applying digit moves within `force_dir_limit`
//! of the direction towards the other fingertip. Range conditions are taken
//! over established pairs only: the largest `R_max` and the smallest `R_min`
//! among them must cover the required radius range.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{
    angle_between, point_in_triangle, solve_r_max, solve_r_min, tangent_spheres, AxisConfig, Point3, SphereFingertip,
    UnitVec3, ANGLE_SLACK,
};
use crate::hand::HandModel;
use crate::kinematics::{Trajectory, TrajectorySample};

#[derive(Debug, Error)]
pub enum GraspError {
    #[error("requirement {0}: lower bound exceeds upper bound")]
    InvertedRange(&'static str),
    #[error("requirement {0} must be finite and non-negative")]
    BadRange(&'static str),
    #[error("angle {0} must lie in (0, pi]")]
    BadAngle(&'static str),
}

/// Closed interval of object radii or widths (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusRange {
    pub lo: f64,
    pub hi: f64,
}

impl RadiusRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspRequirements {
    pub precision: RadiusRange,
    pub lateral: RadiusRange,
    pub tripod: RadiusRange,
    pub manipulation_width: RadiusRange,
    /// Minimum angle at the object centre between the two contact directions (rad).
    pub theta_min: f64,
    /// Permitted deviation of the index reference normal from the grasp direction (rad).
    pub alpha_perm: f64,
    /// Permitted deviation of the force-applying digit's motion (rad).
    pub force_dir_limit: f64,
}

impl GraspRequirements {
    /// Requirement set of the reference prosthesis.
    pub fn reference() -> Self {
        Self {
            precision: RadiusRange::new(0.0, 60.0),
            lateral: RadiusRange::new(0.0, 30.0),
            tripod: RadiusRange::new(10.0, 80.0),
            manipulation_width: RadiusRange::new(0.0, 30.0),
            theta_min: 110f64.to_radians(),
            alpha_perm: 30f64.to_radians(),
            force_dir_limit: 45f64.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<(), GraspError> {
        for (name, r) in [
            ("precision", self.precision),
            ("lateral", self.lateral),
            ("tripod", self.tripod),
            ("manipulation_width", self.manipulation_width),
        ] {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo >= 0.0) {
                return Err(GraspError::BadRange(name));
            }
            if r.lo > r.hi {
                return Err(GraspError::InvertedRange(name));
            }
        }
        for (name, a) in [
            ("theta_min", self.theta_min),
            ("alpha_perm", self.alpha_perm),
            ("force_dir_limit", self.force_dir_limit),
        ] {
            if !(a > 0.0 && a <= PI) {
                return Err(GraspError::BadAngle(name));
            }
        }
        Ok(())
    }
}

/// Cosine form of the two establishment angle limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    cos_alpha: f64,
    cos_force: f64,
}

fn cos_limit(angle: f64) -> f64 {
    let a = angle + ANGLE_SLACK;
    if a >= PI {
        f64::NEG_INFINITY
    } else {
        a.cos()
    }
}

impl Thresholds {
    pub fn new(req: &GraspRequirements) -> Self {
        Self { cos_alpha: cos_limit(req.alpha_perm), cos_force: cos_limit(req.force_dir_limit) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairGrasp {
    Precision,
    Lateral,
}

/// Cosines of the reference-normal and force-direction angles for a pair, or
/// `None` when the fingertip centres coincide.
#[inline]
fn pair_cosines(kind: PairGrasp, thumb: &TrajectorySample, index: &TrajectorySample) -> Option<(f64, f64, f64)> {
    let g = thumb.center - index.center;
    let d = g.norm();
    if !(d > 1e-12) {
        return None;
    }
    let g = g / d;
    Some(match kind {
        PairGrasp::Precision => (d, index.pad_normal.dot(&g), index.tangent.dot(&g)),
        PairGrasp::Lateral => (d, index.side_normal.dot(&g), -thumb.tangent.dot(&g)),
    })
}

pub fn precision_established(thumb: &TrajectorySample, index: &TrajectorySample, th: &Thresholds) -> bool {
    matches!(pair_cosines(PairGrasp::Precision, thumb, index), Some((_, ca, cf)) if ca >= th.cos_alpha && cf >= th.cos_force)
}

pub fn lateral_established(thumb: &TrajectorySample, index: &TrajectorySample, th: &Thresholds) -> bool {
    matches!(pair_cosines(PairGrasp::Lateral, thumb, index), Some((_, ca, cf)) if ca >= th.cos_alpha && cf >= th.cos_force)
}

/// A condition that a failed check did not meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Violation {
    /// No sample pair met both establishment conditions.
    NoEstablishedPair,
    /// The reference normal never came within the permitted angle.
    ReferenceAngle { best: f64, limit: f64 },
    /// The force-applying digit never moved within the permitted angle.
    ForceDirection { best: f64, limit: f64 },
    MaxRadiusShort { achieved: Option<f64>, required: f64 },
    MinRadiusExcess { achieved: Option<f64>, required: f64 },
    /// No thumb/index/middle triple admits an object centred inside the triangle.
    NoContainedObject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub grasp: PairGrasp,
    pub ok: bool,
    pub established_pairs: usize,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    /// (thumb sample, index sample) realizing `r_min` / `r_max`.
    pub r_min_pair: Option<(usize, usize)>,
    pub r_max_pair: Option<(usize, usize)>,
    /// Smallest reference-normal angle over all pairs (rad).
    pub best_alpha: Option<f64>,
    /// Smallest force-direction angle over all pairs (rad).
    pub best_force_angle: Option<f64>,
    pub violations: Vec<Violation>,
}

fn acos_clamped(c: f64) -> f64 {
    c.clamp(-1.0, 1.0).acos()
}

/// Precision or lateral check over all thumb/index sample pairs.
///
/// With `early_exit` the scan stops as soon as both range conditions are
/// witnessed; the `ok` flag is unaffected but diagnostics are partial.
#[allow(clippy::too_many_arguments)]
pub fn check_pair(
    kind: PairGrasp,
    thumb: &[TrajectorySample],
    index: &[TrajectorySample],
    r_thumb: f64,
    r_index: f64,
    range: RadiusRange,
    req: &GraspRequirements,
    early_exit: bool,
) -> PairCheck {
    let th = Thresholds::new(req);
    let mut established = 0usize;
    let mut best_cos_alpha = f64::NEG_INFINITY;
    let mut best_cos_force = f64::NEG_INFINITY;
    let mut r_max: Option<(f64, (usize, usize))> = None;
    let mut r_min: Option<(f64, (usize, usize))> = None;

    'scan: for (j, t) in thumb.iter().enumerate() {
        for (i, f) in index.iter().enumerate() {
            let Some((d, ca, cf)) = pair_cosines(kind, t, f) else { continue };
            best_cos_alpha = best_cos_alpha.max(ca);
            best_cos_force = best_cos_force.max(cf);
            if !(ca >= th.cos_alpha && cf >= th.cos_force) {
                continue;
            }
            established += 1;
            let Ok(hi) = solve_r_max(d, r_thumb, r_index, req.theta_min) else { continue };
            let lo = solve_r_min(d, r_thumb, r_index);
            if r_max.map_or(true, |(v, _)| hi > v) {
                r_max = Some((hi, (j, i)));
            }
            if r_min.map_or(true, |(v, _)| lo < v) {
                r_min = Some((lo, (j, i)));
            }
            if early_exit && r_min.is_some_and(|(v, _)| v <= range.lo) && r_max.is_some_and(|(v, _)| v >= range.hi) {
                break 'scan;
            }
        }
    }

    let max_ok = r_max.is_some_and(|(v, _)| v >= range.hi);
    let min_ok = r_min.is_some_and(|(v, _)| v <= range.lo);
    let ok = established > 0 && max_ok && min_ok;
    let best_alpha = (best_cos_alpha > f64::NEG_INFINITY).then(|| acos_clamped(best_cos_alpha));
    let best_force_angle = (best_cos_force > f64::NEG_INFINITY).then(|| acos_clamped(best_cos_force));

    let mut violations = Vec::new();
    if !ok {
        if established == 0 {
            violations.push(Violation::NoEstablishedPair);
            if best_cos_alpha < th.cos_alpha {
                violations.push(Violation::ReferenceAngle { best: best_alpha.unwrap_or(PI), limit: req.alpha_perm });
            }
            if best_cos_force < th.cos_force {
                violations.push(Violation::ForceDirection { best: best_force_angle.unwrap_or(PI), limit: req.force_dir_limit });
            }
        }
        if !max_ok {
            violations.push(Violation::MaxRadiusShort { achieved: r_max.map(|v| v.0), required: range.hi });
        }
        if !min_ok {
            violations.push(Violation::MinRadiusExcess { achieved: r_min.map(|v| v.0), required: range.lo });
        }
    }

    PairCheck {
        grasp: kind,
        ok,
        established_pairs: established,
        r_min: r_min.map(|v| v.0),
        r_max: r_max.map(|v| v.0),
        r_min_pair: r_min.map(|v| v.1),
        r_max_pair: r_max.map(|v| v.1),
        best_alpha,
        best_force_angle,
        violations,
    }
}

pub fn check_precision(
    thumb: &[TrajectorySample],
    index: &[TrajectorySample],
    radii: (f64, f64),
    req: &GraspRequirements,
) -> PairCheck {
    check_pair(PairGrasp::Precision, thumb, index, radii.0, radii.1, req.precision, req, false)
}

pub fn check_lateral(
    thumb: &[TrajectorySample],
    index: &[TrajectorySample],
    radii: (f64, f64),
    req: &GraspRequirements,
) -> PairCheck {
    check_pair(PairGrasp::Lateral, thumb, index, radii.0, radii.1, req.lateral, req, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripodCheck {
    pub ok: bool,
    /// Tangent objects found centred inside their fingertip triangle.
    pub contained_objects: usize,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    /// (thumb, index, middle) samples realizing `r_max`.
    pub r_max_triple: Option<(usize, usize, usize)>,
    /// Thumb-object-index and thumb-object-middle contact angles at `r_max` (rad).
    pub pair_angles_at_r_max: Option<(f64, f64)>,
    pub violations: Vec<Violation>,
}

/// Tripod check: some object touching all three fingertips must have its
/// centre inside the fingertip triangle, and the radii of such objects must
/// span the required range. Interpenetrating fingertips count as radius 0.
pub fn check_tripod(
    thumb: &[TrajectorySample],
    index: &[TrajectorySample],
    middle: &[TrajectorySample],
    radii: (f64, f64, f64),
    range: RadiusRange,
    early_exit: bool,
) -> TripodCheck {
    let mut contained = 0usize;
    let mut r_min: Option<f64> = None;
    let mut r_max: Option<(f64, (usize, usize, usize), (f64, f64))> = None;

    'scan: for (j, t) in thumb.iter().enumerate() {
        for (i, f) in index.iter().enumerate() {
            for (k, m) in middle.iter().enumerate() {
                let tips = [
                    SphereFingertip { center: t.center, radius: radii.0 },
                    SphereFingertip { center: f.center, radius: radii.1 },
                    SphereFingertip { center: m.center, radius: radii.2 },
                ];
                for sol in tangent_spheres(&tips) {
                    if !point_in_triangle(&sol.center, &t.center, &f.center, &m.center) {
                        continue;
                    }
                    contained += 1;
                    let r = sol.radius.max(0.0);
                    if r_min.map_or(true, |v| r < v) {
                        r_min = Some(r);
                    }
                    if r_max.map_or(true, |(v, _, _)| r > v) {
                        let to = |p: &Point3| UnitVec3::new_normalize(p - sol.center);
                        let angles = (
                            angle_between(&to(&t.center), &to(&f.center)),
                            angle_between(&to(&t.center), &to(&m.center)),
                        );
                        r_max = Some((r, (j, i, k), angles));
                    }
                    if early_exit && r_min.is_some_and(|v| v <= range.lo) && r_max.is_some_and(|(v, _, _)| v >= range.hi) {
                        break 'scan;
                    }
                }
            }
        }
    }

    let max_ok = r_max.is_some_and(|(v, _, _)| v >= range.hi);
    let min_ok = r_min.is_some_and(|v| v <= range.lo);
    let ok = contained > 0 && max_ok && min_ok;
    let mut violations = Vec::new();
    if !ok {
        if contained == 0 {
            violations.push(Violation::NoContainedObject);
        }
        if !max_ok {
            violations.push(Violation::MaxRadiusShort { achieved: r_max.map(|v| v.0), required: range.hi });
        }
        if !min_ok {
            violations.push(Violation::MinRadiusExcess { achieved: r_min, required: range.lo });
        }
    }
    TripodCheck {
        ok,
        contained_objects: contained,
        r_min,
        r_max: r_max.map(|v| v.0),
        r_max_triple: r_max.map(|v| v.1),
        pair_angles_at_r_max: r_max.map(|v| v.2),
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspVerdict {
    pub precision_ok: bool,
    pub lateral_ok: bool,
    pub tripod_ok: bool,
    pub precision: PairCheck,
    pub lateral: PairCheck,
    pub tripod: TripodCheck,
}

impl GraspVerdict {
    pub fn is_valid(&self) -> bool {
        self.precision_ok && self.lateral_ok && self.tripod_ok
    }
}

/// Full verdict with diagnostics for an already placed thumb trajectory.
pub fn verdict_for_thumb(thumb: &Trajectory, hand: &HandModel, req: &GraspRequirements) -> GraspVerdict {
    let r = hand.radii;
    let t = thumb.samples();
    let precision = check_precision(t, hand.index.samples(), (r.thumb, r.index), req);
    let lateral = check_lateral(t, hand.index.samples(), (r.thumb, r.index), req);
    let tripod = check_tripod(t, hand.index.samples(), hand.middle.samples(), (r.thumb, r.index, r.middle), req.tripod, false);
    GraspVerdict { precision_ok: precision.ok, lateral_ok: lateral.ok, tripod_ok: tripod.ok, precision, lateral, tripod }
}

pub fn is_valid_grasp(cfg: &AxisConfig, hand: &HandModel, req: &GraspRequirements) -> GraspVerdict {
    verdict_for_thumb(&hand.thumb_trajectory(cfg), hand, req)
}

/// Validity only, short-circuiting across checks and within each scan.
pub fn grasp_valid_fast(thumb: &[TrajectorySample], hand: &HandModel, req: &GraspRequirements) -> bool {
    let r = hand.radii;
    let index = hand.index.samples();
    check_pair(PairGrasp::Precision, thumb, index, r.thumb, r.index, req.precision, req, true).ok
        && check_pair(PairGrasp::Lateral, thumb, index, r.thumb, r.index, req.lateral, req, true).ok
        && check_tripod(thumb, index, hand.middle.samples(), (r.thumb, r.index, r.middle), req.tripod, true).ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;

    fn sample(center: Point3, tangent: Vec3, pad: Vec3, side: Vec3) -> TrajectorySample {
        TrajectorySample {
            center,
            tangent: UnitVec3::new_normalize(tangent),
            pad_normal: UnitVec3::new_normalize(pad),
            side_normal: UnitVec3::new_normalize(side),
        }
    }

    fn vacuous() -> GraspRequirements {
        GraspRequirements {
            precision: RadiusRange::new(0.0, 0.0),
            lateral: RadiusRange::new(0.0, 0.0),
            tripod: RadiusRange::new(0.0, 0.0),
            manipulation_width: RadiusRange::new(0.0, 0.0),
            theta_min: 110f64.to_radians(),
            alpha_perm: PI,
            force_dir_limit: PI,
        }
    }

    #[test]
    fn perfect_opposition_passes_precision() {
        // index moving +z with its pad facing +z, thumb directly ahead in contact
        let index = [sample(Point3::origin(), Vec3::z(), Vec3::z(), Vec3::x())];
        let thumb = [sample(Point3::new(0.0, 0.0, 16.0), -Vec3::z(), -Vec3::z(), Vec3::y())];
        let mut req = GraspRequirements::reference();
        req.precision = RadiusRange::new(0.0, 0.0);
        let c = check_precision(&thumb, &index, (8.0, 8.0), &req);
        assert!(c.ok, "{c:?}");
        assert_eq!(c.best_alpha, Some(0.0));
    }

    #[test]
    fn orthogonal_pad_fails_precision() {
        let index = [sample(Point3::origin(), Vec3::z(), Vec3::y(), Vec3::x())];
        let thumb = [sample(Point3::new(0.0, 0.0, 16.0), -Vec3::z(), -Vec3::z(), Vec3::y())];
        let mut req = GraspRequirements::reference();
        req.precision = RadiusRange::new(0.0, 0.0);
        let c = check_precision(&thumb, &index, (8.0, 8.0), &req);
        assert!(!c.ok);
        assert!((c.best_alpha.unwrap() - PI / 2.0).abs() < 1e-12);
        assert!(c.violations.contains(&Violation::NoEstablishedPair));
        assert!(c.violations.iter().any(|v| matches!(v, Violation::ReferenceAngle { .. })));
    }

    #[test]
    fn lateral_side_opposition_and_tangential_approach() {
        let index = [sample(Point3::origin(), Vec3::z(), Vec3::z(), Vec3::x())];
        let mut req = GraspRequirements::reference();
        req.lateral = RadiusRange::new(0.0, 0.0);
        let thumb = [sample(Point3::new(16.0, 0.0, 0.0), -Vec3::x(), -Vec3::x(), Vec3::z())];
        assert!(check_lateral(&thumb, &index, (8.0, 8.0), &req).ok);

        let thumb = [sample(Point3::new(16.0, 0.0, 0.0), Vec3::y(), Vec3::y(), Vec3::z())];
        let c = check_lateral(&thumb, &index, (8.0, 8.0), &req);
        assert!(!c.ok);
        assert!(c.violations.iter().any(|v| matches!(v, Violation::ForceDirection { .. })));
    }

    #[test]
    fn range_conditions_reported() {
        let index = [sample(Point3::origin(), Vec3::z(), Vec3::z(), Vec3::x())];
        let thumb = [sample(Point3::new(0.0, 0.0, 40.0), -Vec3::z(), -Vec3::z(), Vec3::y())];
        let req = GraspRequirements::reference();
        let c = check_precision(&thumb, &index, (8.0, 8.0), &req);
        assert!(!c.ok);
        assert_eq!(c.established_pairs, 1);
        assert_eq!(c.r_min, Some(12.0));
        assert!(c.violations.iter().any(|v| matches!(v, Violation::MinRadiusExcess { .. })));
        assert!(c.violations.iter().any(|v| matches!(v, Violation::MaxRadiusShort { .. })));
    }

    #[test]
    fn tripod_collinear_fails_and_overlap_gives_zero() {
        let s = |x: f64, y: f64| sample(Point3::new(x, y, 0.0), Vec3::z(), Vec3::z(), Vec3::x());
        let c = check_tripod(&[s(0.0, 0.0)], &[s(30.0, 0.0)], &[s(60.0, 0.0)], (8.0, 8.0, 8.0), RadiusRange::new(0.0, 0.0), false);
        assert!(!c.ok);
        assert_eq!(c.violations[0], Violation::NoContainedObject);

        let h = 10.0 * 3f64.sqrt() / 2.0;
        let c = check_tripod(&[s(0.0, 0.0)], &[s(10.0, 0.0)], &[s(5.0, h)], (8.0, 8.0, 8.0), RadiusRange::new(0.0, 0.0), false);
        assert!(c.ok, "{c:?}");
        assert_eq!(c.r_min, Some(0.0));
    }

    #[test]
    fn vacuous_requirements_accept_touching_opposition() {
        let index = [sample(Point3::origin(), Vec3::z(), Vec3::z(), Vec3::x())];
        let middle = [sample(Point3::new(-10.0, 0.0, 0.0), Vec3::z(), Vec3::z(), Vec3::x())];
        let thumb = [sample(Point3::new(-5.0, 0.0, 13.5), -Vec3::z(), -Vec3::z(), Vec3::y())];
        let req = vacuous();
        assert!(check_precision(&thumb, &index, (8.0, 8.0), &req).ok);
        assert!(check_lateral(&thumb, &index, (8.0, 8.0), &req).ok);
        assert!(check_tripod(&thumb, &index, &middle, (8.0, 8.0, 8.0), req.tripod, false).ok);
    }

    #[test]
    fn requirement_validation() {
        assert!(GraspRequirements::reference().validate().is_ok());
        let mut r = GraspRequirements::reference();
        r.tripod = RadiusRange::new(90.0, 80.0);
        assert!(matches!(r.validate(), Err(GraspError::InvertedRange("tripod"))));
        let mut r = GraspRequirements::reference();
        r.alpha_perm = 0.0;
        assert!(r.validate().is_err());
    }
}
