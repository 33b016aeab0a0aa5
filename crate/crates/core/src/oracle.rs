//! Slow reference implementations used to cross-check the main path.
//!
//! Nothing here calls the closed-form solvers, the establishment tests or the
//! Apollonius solver of the main path; only vector arithmetic and the input
//! data types are shared. Everything is single-threaded.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{AxisConfig, Point3, Vec3};
use crate::grasp::{is_valid_grasp, GraspRequirements, RadiusRange};
use crate::hand::HandModel;
use crate::kinematics::{Branch, FourBarLinkage, TrajectorySample};
use crate::manip::{manipulation_range, WidthInterval};
use crate::optimizer::{score, Problem};

/// Angle slack used by every oracle comparison against a limit.
const SLACK: f64 = 1e-9;
const BISECT_ITERS: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("object cannot touch both fingertips at this radius")]
    Infeasible,
    #[error("need at least {min} scan samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("linkage cannot be assembled at this input angle")]
    Unassemblable,
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn angle_acos(u: &Vec3, v: &Vec3) -> f64 {
    (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos()
}

/// Contact angle found by placing the object centre numerically.
///
/// The centre is swept over the circle of points at distance `R + r_a` from
/// tip `a`, parametrized by the angle `phi` from the line towards `b`; the
/// distance to `b` grows with `phi`, so the contact with `b` is bracketed on
/// a `samples`-point scan and refined by bisection.
pub fn oracle_contact_angle(
    a: (Point3, f64),
    b: (Point3, f64),
    object_radius: f64,
    samples: usize,
) -> Result<f64, OracleError> {
    if samples < 1000 {
        return Err(OracleError::TooFewSamples { min: 1000, got: samples });
    }
    let axis = b.0 - a.0;
    let d = axis.norm();
    if d == 0.0 {
        return Err(OracleError::Infeasible);
    }
    let u = axis / d;
    let helper = if u.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let v = (helper - u * helper.dot(&u)).normalize();
    let ra = object_radius + a.1;
    let rb = object_radius + b.1;
    let centre = |phi: f64| a.0 + (u * phi.cos() + v * phi.sin()) * ra;
    let residual = |phi: f64| (centre(phi) - b.0).norm() - rb;

    let tol = 1e-9 * (1.0 + d);
    let mut prev = (0.0, residual(0.0));
    if prev.1 > tol {
        return Err(OracleError::Infeasible);
    }
    let mut root = None;
    if prev.1.abs() <= tol {
        root = Some(0.0);
    } else {
        for k in 1..=samples {
            let phi = PI * k as f64 / samples as f64;
            let f = residual(phi);
            if f.abs() <= tol && f >= 0.0 {
                root = Some(phi);
                break;
            }
            if f > 0.0 {
                root = Some(bisect(prev.0, phi, residual));
                break;
            }
            prev = (phi, f);
        }
    }
    let phi = root.ok_or(OracleError::Infeasible)?;
    let x = centre(phi);
    Ok(angle_acos(&(a.0 - x), &(b.0 - x)))
}

/// Largest radius whose numerically measured contact angle is at least
/// `theta_min`, by bracketing and bisection on the radius.
pub fn oracle_r_max(d: f64, r_a: f64, r_b: f64, theta_min: f64) -> Option<f64> {
    let a = (Point3::origin(), r_a);
    let b = (Point3::new(d, 0.0, 0.0), r_b);
    let excess = |r: f64| oracle_contact_angle(a, b, r, 2000).map(|t| t - theta_min);
    let lo = (0.5 * (d - r_a - r_b)).max(0.0);
    if excess(lo).map_or(true, |e| e < 0.0) {
        return None;
    }
    let mut hi = lo + 1.0;
    while excess(hi).is_ok_and(|e| e >= 0.0) {
        hi *= 2.0;
        if hi > 1e7 {
            return None;
        }
    }
    Some(bisect(lo, hi, |r| excess(r).unwrap_or(-1.0)))
}

/// Contact angle by the plain law of cosines on the centre triangle.
fn law_of_cosines_angle(d: f64, a: f64, b: f64) -> Option<f64> {
    if d > a + b || d < (a - b).abs() || a <= 0.0 || b <= 0.0 {
        return None;
    }
    Some(((a * a + b * b - d * d) / (2.0 * a * b)).clamp(-1.0, 1.0).acos())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub precision: bool,
    pub lateral: bool,
    pub tripod: bool,
}

impl OracleVerdict {
    pub fn is_valid(&self) -> bool {
        self.precision && self.lateral && self.tripod
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Precision,
    Lateral,
}

/// Reference-normal and force-direction angles for a thumb/index pair.
fn pair_angles(kind: Kind, thumb: &TrajectorySample, index: &TrajectorySample) -> Option<(f64, f64)> {
    let g = thumb.center - index.center;
    if g.norm() <= 1e-12 {
        return None;
    }
    Some(match kind {
        Kind::Precision => (angle_acos(&index.pad_normal, &g), angle_acos(&index.tangent, &g)),
        Kind::Lateral => (angle_acos(&index.side_normal, &g), angle_acos(&thumb.tangent, &(-g))),
    })
}

fn established(kind: Kind, thumb: &TrajectorySample, index: &TrajectorySample, req: &GraspRequirements) -> bool {
    pair_angles(kind, thumb, index)
        .is_some_and(|(alpha, force)| alpha <= req.alpha_perm + SLACK && force <= req.force_dir_limit + SLACK)
}

/// Object radii to test: a uniform grid plus the range bounds themselves.
fn radius_grid(step: f64, upper: f64, range: RadiusRange) -> Vec<f64> {
    let mut rs: Vec<f64> = (0..).map(|k| k as f64 * step).take_while(|r| *r <= upper).collect();
    rs.push(range.lo.max(0.0));
    rs.push(range.hi.max(0.0));
    rs
}

fn pair_ok(
    kind: Kind,
    thumb: &[TrajectorySample],
    index: &[TrajectorySample],
    radii: (f64, f64),
    range: RadiusRange,
    req: &GraspRequirements,
    step: f64,
) -> bool {
    let (mut any_max, mut any_min) = (false, false);
    for t in thumb {
        for f in index {
            if !established(kind, t, f, req) {
                continue;
            }
            let d = (t.center - f.center).norm();
            let graspable = |r: f64| law_of_cosines_angle(d, r + radii.0, r + radii.1).is_some_and(|th| th >= req.theta_min - SLACK);
            let upper = 0.5 * d + range.hi.max(0.0) + step;
            let grid = radius_grid(step, upper, range);
            let ok: Vec<f64> = grid.into_iter().filter(|&r| graspable(r)).collect();
            if ok.is_empty() {
                continue;
            }
            any_max |= ok.iter().any(|&r| r >= range.hi);
            any_min |= ok.iter().any(|&r| r <= range.lo);
            if any_max && any_min {
                return true;
            }
        }
    }
    false
}

/// Radii of objects touching three fingertips with the centre in their plane
/// and inside their triangle, found by scanning the radius.
///
/// For a given radius the two circles of admissible centres around the
/// first two fingertips meet in up to two points; each is a root when its
/// distance to the third fingertip equals `R + r_3`.
pub fn oracle_tripod_radii(tips: [(Point3, f64); 3], step: f64) -> Vec<f64> {
    let [(p1, r1), (p2, r2), (p3, r3)] = tips;
    let e12 = p2 - p1;
    let n = e12.cross(&(p3 - p1));
    let longest = e12.norm().max((p3 - p1).norm()).max((p3 - p2).norm());
    if n.norm() <= 1e-9 * longest * longest || longest == 0.0 {
        return Vec::new();
    }
    let d12 = e12.norm();
    let ex = e12 / d12;
    let ey = n.normalize().cross(&ex);

    // Both circle intersections for radius R, or None when the circles miss.
    let meet = |r: f64| -> Option<[Point3; 2]> {
        let (a, b) = (r + r1, r + r2);
        if a <= 0.0 || b <= 0.0 || d12 > a + b || d12 < (a - b).abs() {
            return None;
        }
        let x = (a * a - b * b + d12 * d12) / (2.0 * d12);
        let h = (a * a - x * x).max(0.0).sqrt();
        Some([p1 + ex * x + ey * h, p1 + ex * x - ey * h])
    };
    let residual = |r: f64, branch: usize| meet(r).map(|m| (m[branch] - p3).norm() - (r + r3));

    let r_lo = -r1.min(r2).min(r3) + 1e-9;
    let r_hi = longest + step;
    let count = ((r_hi - r_lo) / step).ceil() as usize;
    let grid: Vec<f64> = (0..=count).map(|k| r_lo + (r_hi - r_lo) * k as f64 / count as f64).collect();

    let mut roots = Vec::new();
    let bracket = |a: f64, b: f64, branch: usize, roots: &mut Vec<f64>| {
        let (Some(fa), Some(fb)) = (residual(a, branch), residual(b, branch)) else { return };
        if fa == 0.0 {
            roots.push(a);
        } else if a < b && (fa < 0.0) != (fb < 0.0) && fb != 0.0 {
            roots.push(bisect(a, b, |r| residual(r, branch).unwrap_or(f64::NAN)));
        }
    };
    // Last radius on the `inside` side of the boundary where the circles stop meeting.
    let edge = |mut inside: f64, mut outside: f64| {
        for _ in 0..BISECT_ITERS {
            let m = 0.5 * (inside + outside);
            if m == inside || m == outside {
                break;
            }
            if meet(m).is_some() {
                inside = m;
            } else {
                outside = m;
            }
        }
        inside
    };
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        for branch in 0..2 {
            match (meet(a).is_some(), meet(b).is_some()) {
                (true, true) => bracket(a, b, branch, &mut roots),
                (true, false) => bracket(a, edge(a, b), branch, &mut roots),
                (false, true) => bracket(edge(b, a), b, branch, &mut roots),
                (false, false) => {}
            }
        }
    }
    if let Some(&last) = grid.last() {
        for branch in 0..2 {
            if residual(last, branch) == Some(0.0) {
                roots.push(last);
            }
        }
    }

    let mut out = Vec::new();
    for r in roots {
        let Some(m) = meet(r) else { continue };
        for c in m {
            if ((c - p3).norm() - (r + r3)).abs() > 1e-6 {
                continue;
            }
            if inside_triangle(&c, &p1, &p2, &p3) {
                out.push(r.max(0.0));
                break;
            }
        }
    }
    out
}

/// Containment by same-side tests against the three edges.
fn inside_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> bool {
    let n = (b - a).cross(&(c - a));
    let scale = n.norm();
    let side = |u: &Point3, v: &Point3| (v - u).cross(&(p - u)).dot(&n) / scale;
    let tol = 1e-9 * (b - a).norm().max((c - a).norm());
    side(a, b) >= -tol && side(b, c) >= -tol && side(c, a) >= -tol
}

fn tripod_ok(
    thumb: &[TrajectorySample],
    index: &[TrajectorySample],
    middle: &[TrajectorySample],
    radii: (f64, f64, f64),
    range: RadiusRange,
    step: f64,
) -> bool {
    let (mut any_max, mut any_min) = (false, false);
    for t in thumb {
        for f in index {
            for m in middle {
                for r in oracle_tripod_radii([(t.center, radii.0), (f.center, radii.1), (m.center, radii.2)], step) {
                    any_max |= r >= range.hi;
                    any_min |= r <= range.lo;
                }
                if any_max && any_min {
                    return true;
                }
            }
        }
    }
    false
}

/// Grasp verdict by exhaustive enumeration of sample pairs, triples and object radii.
pub fn oracle_validity(cfg: &AxisConfig, hand: &HandModel, req: &GraspRequirements, radius_step: f64) -> OracleVerdict {
    let thumb = hand.thumb_trajectory(cfg);
    let t = thumb.samples();
    let i = hand.index.samples();
    let r = hand.radii;
    OracleVerdict {
        precision: pair_ok(Kind::Precision, t, i, (r.thumb, r.index), req.precision, req, radius_step),
        lateral: pair_ok(Kind::Lateral, t, i, (r.thumb, r.index), req.lateral, req, radius_step),
        tripod: tripod_ok(t, i, hand.middle.samples(), (r.thumb, r.index, r.middle), req.tripod, radius_step),
    }
}

/// Manipulable widths by direct sweep: a width passes when, for every held
/// index pose, every thumb step between the last lateral and the following
/// precision pose leaves a surface gap within `[w - 2 delta_m, w]`.
pub fn oracle_width_sweep(cfg: &AxisConfig, hand: &HandModel, req: &GraspRequirements, delta_m: f64, width_step: f64) -> WidthInterval {
    let thumb = hand.thumb_trajectory(cfg);
    let t = thumb.samples();
    let rs = hand.radii.thumb + hand.radii.index;
    let mut gaps: Vec<Vec<f64>> = Vec::new();
    for f in hand.manipulation_index.samples() {
        let Some(jl) = (0..t.len()).rev().find(|&j| established(Kind::Lateral, &t[j], f, req)) else {
            return WidthInterval::EMPTY;
        };
        let Some(jp) = (jl..t.len()).find(|&j| established(Kind::Precision, &t[j], f, req)) else {
            return WidthInterval::EMPTY;
        };
        gaps.push((jl..=jp).map(|j| (t[j].center - f.center).norm() - rs).collect());
    }
    if gaps.is_empty() {
        return WidthInterval::EMPTY;
    }
    let top = gaps.iter().flatten().fold(0.0f64, |m, g| m.max(*g)) + 2.0 * delta_m + width_step;
    let holds = |w: f64| gaps.iter().flatten().all(|g| *g <= w + 1e-12 && *g >= w - 2.0 * delta_m - 1e-12);
    let mut best: Option<(f64, f64)> = None;
    let mut run: Option<(f64, f64)> = None;
    let steps = (top / width_step).ceil() as usize;
    for k in 0..=steps {
        let w = k as f64 * width_step;
        if holds(w) {
            run = Some(run.map_or((w, w), |(lo, _)| (lo, w)));
        } else {
            run = None;
        }
        if let Some((lo, hi)) = run {
            if best.map_or(true, |(blo, bhi)| hi - lo > bhi - blo) {
                best = Some((lo, hi));
            }
        }
    }
    best.map_or(WidthInterval::EMPTY, |(lo, hi)| WidthInterval::new(lo, hi))
}

/// Coupler point by scanning the output-link angle for loop closure.
pub fn oracle_four_bar(linkage: &FourBarLinkage, input_angle: f64, branch: Branch, samples: usize) -> Result<Point3, OracleError> {
    let a = nalgebra::Vector2::new(0.0, 0.0);
    let b = a + nalgebra::Vector2::new(input_angle.cos(), input_angle.sin()) * linkage.input;
    let d = nalgebra::Vector2::new(linkage.ground_angle.cos(), linkage.ground_angle.sin()) * linkage.ground;
    let joint = |psi: f64| d + nalgebra::Vector2::new(psi.cos(), psi.sin()) * linkage.output;
    let f = |psi: f64| (joint(psi) - b).norm() - linkage.coupler;
    let bd = d - b;
    // Positive when the output joint lies left of the line from B to D.
    let left = |c: nalgebra::Vector2<f64>| bd.x * (c - b).y - bd.y * (c - b).x;
    let want_left = matches!(branch, Branch::Open);
    let mut found = None;
    for k in 0..samples {
        let p0 = 2.0 * PI * k as f64 / samples as f64;
        let p1 = 2.0 * PI * (k + 1) as f64 / samples as f64;
        let (f0, f1) = (f(p0), f(p1));
        let root = if f0 == 0.0 {
            p0
        } else if (f0 < 0.0) != (f1 < 0.0) {
            bisect(p0, p1, f)
        } else {
            continue;
        };
        let c = joint(root);
        if (left(c) > 0.0) == want_left {
            found = Some(c);
            break;
        }
    }
    let c = found.ok_or(OracleError::Unassemblable)?;
    let ec = (c - b) / (c - b).norm();
    let ep = nalgebra::Vector2::new(-ec.y, ec.x);
    let p = b + ec * linkage.coupler_point.0 + ep * linkage.coupler_point.1;
    Ok(linkage.frame.origin + linkage.frame.u.as_ref() * p.x + linkage.frame.v.as_ref() * p.y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialOutcome {
    pub omega_index: Option<u64>,
    pub interval: WidthInterval,
    pub valid_count: u64,
}

/// Two passes over the grid: collect every valid configuration with the full
/// grasp check, then pick the widest interval, first encountered on ties.
pub fn oracle_optimize(problem: &Problem) -> SequentialOutcome {
    let valid: Vec<u64> = problem
        .grid
        .enumerate()
        .filter(|(_, cfg)| is_valid_grasp(cfg, &problem.hand, &problem.req).is_valid())
        .map(|(i, _)| i)
        .collect();
    let mut best: Option<(u64, WidthInterval)> = None;
    let mut w_max = f64::NEG_INFINITY;
    for &i in &valid {
        let cfg = problem.grid.config_at(i);
        let w = manipulation_range(&cfg, &problem.hand, &problem.req, problem.delta_m).overall;
        if score(&w) > w_max {
            w_max = score(&w);
            best = Some((i, w));
        }
    }
    SequentialOutcome {
        omega_index: best.map(|b| b.0),
        interval: best.map_or(WidthInterval::EMPTY, |b| b.1),
        valid_count: valid.len() as u64,
    }
}
