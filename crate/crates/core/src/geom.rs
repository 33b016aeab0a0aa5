//! 3-D primitives, the thumb axis pose, and closed-form sphere-contact solvers.
//!
//! All lengths are millimetres and all angles radians. Fingertips and grasped
//! objects are spheres; a two-finger grasp of an object of radius `R` forms a
//! triangle between the two fingertip centres and the object centre with side
//! lengths `R + r_a`, `R + r_b` and the fingertip separation `d`.

use std::f64::consts::PI;

use nalgebra as na;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = na::Vector3<f64>;
pub type Point3 = na::Point3<f64>;
pub type UnitVec3 = na::Unit<Vec3>;
pub type RigidTransform = na::Isometry3<f64>;

/// Tolerance for identities that hold exactly in real arithmetic.
pub const EXACT_TOL: f64 = 1e-9;
/// Accuracy target for iterative length solvers (mm).
pub const SOLVER_TOL_MM: f64 = 1e-6;
/// Iteration cap for every bisection in the crate.
pub const MAX_BISECTION_ITERS: usize = 100;
/// Slack applied to angular threshold comparisons so boundary cases are deterministic.
pub const ANGLE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("fingertip radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("object of radius {radius} mm cannot reach both fingertips {separation} mm apart")]
    OutOfReach { separation: f64, radius: f64 },
    #[error("fingertip spheres are nested ({separation} mm apart), no contact triangle exists")]
    Nested { separation: f64 },
    #[error("no object radius reaches a contact angle of {theta_min} rad at separation {separation} mm")]
    NoGrasp { separation: f64, theta_min: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Placement of the thumb rotation axis: frame origin plus intrinsic
/// roll (x), pitch (y), yaw (z) applied in that order. The rotation axis of
/// the thumb is the local z axis of this frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisConfig {
    pub origin: Point3,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl AxisConfig {
    pub fn new(origin: Point3, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            origin,
            roll: normalize_angle(roll),
            pitch: normalize_angle(pitch),
            yaw: normalize_angle(yaw),
        }
    }

    pub fn identity() -> Self {
        Self::new(Point3::origin(), 0.0, 0.0, 0.0)
    }

    /// Builds a configuration from `[x, y, z]` in mm and `[roll, pitch, yaw]` in degrees.
    pub fn from_mm_deg(values: [f64; 6]) -> Self {
        Self::new(
            Point3::new(values[0], values[1], values[2]),
            values[3].to_radians(),
            values[4].to_radians(),
            values[5].to_radians(),
        )
    }

    pub fn to_mm_deg(&self) -> [f64; 6] {
        [
            self.origin.x,
            self.origin.y,
            self.origin.z,
            self.roll.to_degrees(),
            self.pitch.to_degrees(),
            self.yaw.to_degrees(),
        ]
    }
}

/// Rigid transform realizing an axis configuration.
pub fn axis_frame(cfg: &AxisConfig) -> RigidTransform {
    let rotation = na::UnitQuaternion::from_axis_angle(&Vec3::x_axis(), cfg.roll)
        * na::UnitQuaternion::from_axis_angle(&Vec3::y_axis(), cfg.pitch)
        * na::UnitQuaternion::from_axis_angle(&Vec3::z_axis(), cfg.yaw);
    RigidTransform::from_parts(na::Translation3::from(cfg.origin.coords), rotation)
}

/// Rodrigues rotation of `p` about the line through `axis_point` along `axis_dir`.
pub fn rotate_about_axis(p: &Point3, axis_point: &Point3, axis_dir: &UnitVec3, angle: f64) -> Point3 {
    let k = axis_dir.as_ref();
    let v = p - axis_point;
    let (s, c) = angle.sin_cos();
    let rotated = v * c + k.cross(&v) * s + k * (k.dot(&v) * (1.0 - c));
    axis_point + rotated
}

/// Unsigned angle between two unit vectors, accurate near 0 and pi.
pub fn angle_between(u: &UnitVec3, v: &UnitVec3) -> f64 {
    let diff = (u.as_ref() - v.as_ref()).norm();
    let sum = (u.as_ref() + v.as_ref()).norm();
    2.0 * diff.atan2(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereFingertip {
    pub center: Point3,
    pub radius: f64,
}

impl SphereFingertip {
    pub fn new(center: Point3, radius: f64) -> Result<Self, GeomError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeomError::NonPositiveRadius(radius));
        }
        Ok(Self { center, radius })
    }
}

/// Angle at the object centre between the two contact directions for a
/// separation `d` and tip radii `r_a`, `r_b`.
pub fn contact_angle(d: f64, r_a: f64, r_b: f64, object_radius: f64) -> Result<f64, GeomError> {
    let u = object_radius + r_a;
    let v = object_radius + r_b;
    if d > u + v + EXACT_TOL * (1.0 + d) {
        return Err(GeomError::OutOfReach { separation: d, radius: object_radius });
    }
    if d < (u - v).abs() - EXACT_TOL * (1.0 + d) || (d <= 0.0) {
        return Err(GeomError::Nested { separation: d });
    }
    // Half-angle form of the law of cosines; stays accurate as the triangle
    // flattens towards theta = pi.
    let s = 0.5 * (u + v + d);
    let num = ((s - u) * (s - v)).max(0.0).sqrt();
    let den = (s * (s - d)).max(0.0).sqrt();
    Ok(2.0 * num.atan2(den))
}

/// Contact angle for an object of radius `object_radius` touching both tips.
pub fn solve_object_placement(
    tip_a: &SphereFingertip,
    tip_b: &SphereFingertip,
    object_radius: f64,
) -> Result<f64, GeomError> {
    if object_radius < 0.0 {
        return Err(GeomError::InvalidArgument("object radius must be non-negative"));
    }
    let d = (tip_a.center - tip_b.center).norm();
    contact_angle(d, tip_a.radius, tip_b.radius, object_radius)
}

/// Largest object radius whose contact angle is still at least `theta_min`.
///
/// The contact angle falls monotonically with the object radius, so the
/// boundary is the positive root of
/// `2 (1 - cos theta_min) (R + r_a)(R + r_b) = d^2 - (r_a - r_b)^2`.
pub fn solve_r_max(d: f64, r_a: f64, r_b: f64, theta_min: f64) -> Result<f64, GeomError> {
    if !(theta_min > 0.0 && theta_min <= PI) {
        return Err(GeomError::InvalidArgument("theta_min must lie in (0, pi]"));
    }
    if !(d > 0.0) {
        return Err(GeomError::InvalidArgument("separation must be positive"));
    }
    let one_minus_cos = 1.0 - theta_min.cos();
    let diff = r_a - r_b;
    let k = (d * d - diff * diff) / (2.0 * one_minus_cos);
    let disc = diff * diff + 4.0 * k;
    if disc < 0.0 {
        return Err(GeomError::NoGrasp { separation: d, theta_min });
    }
    let root = 0.5 * (disc.sqrt() - (r_a + r_b));
    if root < 0.0 {
        return Err(GeomError::NoGrasp { separation: d, theta_min });
    }
    Ok(root)
}

/// Smallest graspable radius: the object centre collinear with both tips.
/// Interpenetrating tips clamp to zero.
pub fn solve_r_min(d: f64, r_a: f64, r_b: f64) -> f64 {
    (0.5 * (d - r_a - r_b)).max(0.0)
}

/// A sphere touching three fingertip spheres externally, with its centre in
/// the plane of the three fingertip centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentSphere {
    pub center: Point3,
    /// Signed radius; negative values mean the fingertips interpenetrate.
    pub radius: f64,
}

/// Solves the planar Apollonius problem for three fingertips: every sphere
/// centred in the fingertip plane at distance `R + r_k` from each centre.
///
/// Returns an empty list for collinear (zero-area) configurations. Roots
/// with `R + r_k <= 0` for some fingertip are discarded.
pub fn tangent_spheres(tips: &[SphereFingertip; 3]) -> Vec<TangentSphere> {
    let mut out = Vec::with_capacity(2);
    let Some(frame) = TriangleFrame::new(&tips[0].center, &tips[1].center, &tips[2].center) else {
        return out;
    };
    let (q2, q3) = (frame.q2, frame.q3);
    let (r1, r2, r3) = (tips[0].radius, tips[1].radius, tips[2].radius);

    // c . q_k = (|q_k|^2 - r_k^2 + r_1^2) / 2 - R (r_k - r_1)
    let a2 = 0.5 * (q2.norm_squared() - r2 * r2 + r1 * r1);
    let a3 = 0.5 * (q3.norm_squared() - r3 * r3 + r1 * r1);
    let b2 = -(r2 - r1);
    let b3 = -(r3 - r1);
    let det = q2.x * q3.y - q2.y * q3.x;
    let solve = |s2: f64, s3: f64| {
        na::Vector2::new((s2 * q3.y - s3 * q2.y) / det, (q2.x * s3 - q3.x * s2) / det)
    };
    let base = solve(a2, a3);
    let slope = solve(b2, b3);

    // |base + slope R|^2 = (R + r_1)^2
    let qa = slope.norm_squared() - 1.0;
    let qb = 2.0 * (base.dot(&slope) - r1);
    let qc = base.norm_squared() - r1 * r1;
    let min_r = r1.min(r2).min(r3);
    for radius in quadratic_roots(qa, qb, qc) {
        if radius + min_r <= 0.0 {
            continue;
        }
        let c2 = base + slope * radius;
        out.push(TangentSphere { center: frame.lift(&c2), radius });
    }
    out
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-12 * scale {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return vec![0.0];
    }
    let (x1, x2) = (q / a, c / q);
    if sq == 0.0 {
        vec![x1]
    } else {
        vec![x1.min(x2), x1.max(x2)]
    }
}

/// Orthonormal 2-D coordinates in the plane of a triangle, anchored at its first vertex.
struct TriangleFrame {
    origin: Point3,
    e1: Vec3,
    e2: Vec3,
    q2: na::Vector2<f64>,
    q3: na::Vector2<f64>,
}

impl TriangleFrame {
    fn new(a: &Point3, b: &Point3, c: &Point3) -> Option<Self> {
        let ab = b - a;
        let ac = c - a;
        let n = ab.cross(&ac);
        let scale = ab.norm() * ac.norm();
        if scale == 0.0 || n.norm() <= 1e-9 * scale {
            return None;
        }
        let e1 = ab.normalize();
        let e2 = n.cross(&ab).normalize();
        Some(Self {
            origin: *a,
            e1,
            e2,
            q2: na::Vector2::new(ab.dot(&e1), ab.dot(&e2)),
            q3: na::Vector2::new(ac.dot(&e1), ac.dot(&e2)),
        })
    }

    fn lift(&self, p: &na::Vector2<f64>) -> Point3 {
        self.origin + self.e1 * p.x + self.e2 * p.y
    }
}

/// Closed-triangle containment for a point assumed to lie in the triangle's plane.
pub fn point_in_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> bool {
    let v0 = b - a;
    let v1 = c - a;
    let v2 = p - a;
    let d00 = v0.dot(&v0);
    let d01 = v0.dot(&v1);
    let d11 = v1.dot(&v1);
    let d20 = v2.dot(&v0);
    let d21 = v2.dot(&v1);
    let denom = d00 * d11 - d01 * d01;
    if denom <= 0.0 {
        return false;
    }
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    let u = 1.0 - v - w;
    let tol = -EXACT_TOL;
    u >= tol && v >= tol && w >= tol
}
