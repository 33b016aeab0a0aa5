//! Finger trajectory generators: four-bar coupler curves for the index and
//! middle fingers, the piston-crank thumb drive, the ring/little differential,
//! and the circular thumb-tip path about its rotation axis.

use std::io::Read;

use nalgebra as na;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{axis_frame, rotate_about_axis, AxisConfig, Point3, UnitVec3, Vec3, EXACT_TOL};

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("linkage cannot be assembled at input angle {0} rad")]
    Unassemblable(f64),
    #[error("slider position {position} mm outside stroke [{min}, {max}] mm")]
    OutOfStroke { position: f64, min: f64, max: f64 },
    #[error("both differential outputs are constrained; the mechanism stalls")]
    Stall,
    #[error("trajectory needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite coordinate in trajectory sample {0}")]
    NonFinite(usize),
    #[error("consecutive trajectory samples {0} and {1} coincide")]
    DuplicateSample(usize, usize),
    #[error("tangent at sample {0} is parallel to the thumb-side vector")]
    DegenerateNormal(usize),
    #[error("thumb tip lies on its rotation axis")]
    DegenerateThumb,
    #[error("invalid mechanism parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("polyline row {row}: {message}")]
    Polyline { row: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One discretized fingertip pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub center: Point3,
    /// Direction of fingertip motion (normalized forward difference).
    pub tangent: UnitVec3,
    /// Outward normal of the fingertip pad.
    pub pad_normal: UnitVec3,
    /// Outward normal of the radial side of the finger, facing the thumb.
    pub side_normal: UnitVec3,
}

/// Ordered fingertip samples with the actuator parameter that produced each.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
    params: Vec<f64>,
}

/// How pad and side normals are derived when a source does not provide them.
///
/// The side normal is the component of `thumb_side` perpendicular to the
/// motion tangent; for a finger flexing in a plane whose normal is
/// `thumb_side` this is exactly the plane normal. The pad normal is the
/// tangent rotated about the side normal by `pad_angle`, then tilted towards
/// the side normal by `pad_tilt`; with both zero the pad leads the flexion
/// motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalRule {
    pub thumb_side: UnitVec3,
    pub pad_angle: f64,
    pub pad_tilt: f64,
}

impl Default for NormalRule {
    fn default() -> Self {
        Self { thumb_side: Vec3::x_axis(), pad_angle: 0.0, pad_tilt: 0.0 }
    }
}

impl NormalRule {
    fn normals(&self, tangent: &UnitVec3, index: usize) -> Result<(UnitVec3, UnitVec3), KinematicsError> {
        let t = tangent.as_ref();
        let s = self.thumb_side.as_ref();
        let perp = s - t * s.dot(t);
        if perp.norm() < 1e-9 {
            return Err(KinematicsError::DegenerateNormal(index));
        }
        let side = UnitVec3::new_normalize(perp);
        let pad = rotate_about_axis(&Point3::from(*t), &Point3::origin(), &side, self.pad_angle).coords;
        let pad = pad * self.pad_tilt.cos() + side.as_ref() * self.pad_tilt.sin();
        Ok((UnitVec3::new_normalize(pad), side))
    }
}

/// Forward-difference unit tangents; the last sample repeats the previous one.
fn tangents(points: &[Point3]) -> Result<Vec<UnitVec3>, KinematicsError> {
    let mut out = Vec::with_capacity(points.len());
    for k in 0..points.len() - 1 {
        let step = points[k + 1] - points[k];
        let len = step.norm();
        if !(len > 1e-12) {
            return Err(KinematicsError::DuplicateSample(k, k + 1));
        }
        out.push(UnitVec3::new_unchecked(step / len));
    }
    let last = out[out.len() - 1];
    out.push(last);
    Ok(out)
}

fn check_points(points: &[Point3]) -> Result<(), KinematicsError> {
    if points.len() < 2 {
        return Err(KinematicsError::TooFewSamples(points.len()));
    }
    if let Some(k) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
        return Err(KinematicsError::NonFinite(k));
    }
    Ok(())
}

impl Trajectory {
    /// Builds a trajectory from points, deriving tangents and normals.
    pub fn from_points(points: Vec<Point3>, params: Vec<f64>, rule: &NormalRule) -> Result<Self, KinematicsError> {
        check_points(&points)?;
        let tangents = tangents(&points)?;
        let mut samples = Vec::with_capacity(points.len());
        for (k, (center, tangent)) in points.into_iter().zip(tangents).enumerate() {
            let (pad_normal, side_normal) = rule.normals(&tangent, k)?;
            samples.push(TrajectorySample { center, tangent, pad_normal, side_normal });
        }
        Ok(Self { samples, params })
    }

    /// Builds a trajectory whose normals are given explicitly.
    pub fn with_normals(
        points: Vec<Point3>,
        normals: Vec<(Vec3, Vec3)>,
        params: Vec<f64>,
    ) -> Result<Self, KinematicsError> {
        check_points(&points)?;
        let tangents = tangents(&points)?;
        let mut samples = Vec::with_capacity(points.len());
        for (k, ((center, tangent), (pad, side))) in points.into_iter().zip(tangents).zip(normals).enumerate() {
            if !(pad.norm() > 1e-12 && side.norm() > 1e-12) || !pad.iter().chain(side.iter()).all(|c| c.is_finite()) {
                return Err(KinematicsError::NonFinite(k));
            }
            samples.push(TrajectorySample {
                center,
                tangent,
                pad_normal: UnitVec3::new_normalize(pad),
                side_normal: UnitVec3::new_normalize(side),
            });
        }
        Ok(Self { samples, params })
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Applies a rigid transform (or a reflection, via `linear`) to every sample.
    pub fn transformed(&self, linear: &na::Matrix3<f64>, offset: &Vec3) -> Self {
        let map_v = |v: &UnitVec3| UnitVec3::new_normalize(linear * v.as_ref());
        let samples = self
            .samples
            .iter()
            .map(|s| TrajectorySample {
                center: Point3::from(linear * s.center.coords + offset),
                tangent: map_v(&s.tangent),
                pad_normal: map_v(&s.pad_normal),
                side_normal: map_v(&s.side_normal),
            })
            .collect();
        Self { samples, params: self.params.clone() }
    }

    /// Sphere about the sample centroid enclosing every sample centre.
    pub fn bounding_sphere(&self) -> (Point3, f64) {
        let n = self.samples.len() as f64;
        let centroid = Point3::from(self.samples.iter().fold(Vec3::zeros(), |acc, s| acc + s.center.coords) / n);
        let radius = self.samples.iter().map(|s| (s.center - centroid).norm()).fold(0.0, f64::max);
        (centroid, radius)
    }
}

/// Reads a polyline CSV: `x,y,z[,nx,ny,nz,sx,sy,sz]` per row in mm.
/// Blank lines, `#` comments and a non-numeric header row are skipped.
pub fn read_polyline<R: Read>(reader: R, rule: &NormalRule) -> Result<Trajectory, KinematicsError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| KinematicsError::Polyline { row: row + 1, message: e.to_string() })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if row == 0 => continue,
            Err(e) => return Err(KinematicsError::Polyline { row: row + 1, message: e.to_string() }),
        };
        match values.len() {
            3 | 9 => {}
            n => {
                return Err(KinematicsError::Polyline {
                    row: row + 1,
                    message: format!("expected 3 or 9 columns, found {n}"),
                })
            }
        }
        points.push(Point3::new(values[0], values[1], values[2]));
        if values.len() == 9 {
            normals.push((Vec3::new(values[3], values[4], values[5]), Vec3::new(values[6], values[7], values[8])));
        }
    }
    let params = (0..points.len()).map(|k| k as f64).collect();
    if normals.is_empty() {
        Trajectory::from_points(points, params, rule)
    } else if normals.len() == points.len() {
        Trajectory::with_normals(points, normals, params)
    } else {
        Err(KinematicsError::Polyline { row: 0, message: "normals must be given on every row or none".into() })
    }
}

/// Assembly branch of a four-bar: which side of the input-to-output-pivot
/// diagonal the coupler/output joint sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Joint to the left of the diagonal from the coupler-input joint to the output pivot.
    Open,
    Crossed,
}

/// Plane in which a planar mechanism moves, embedded in hand coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFrame {
    pub origin: Point3,
    pub u: UnitVec3,
    pub v: UnitVec3,
}

impl PlaneFrame {
    pub fn new(origin: Point3, u: Vec3, v: Vec3) -> Result<Self, KinematicsError> {
        let u = UnitVec3::try_new(u, 1e-12).ok_or(KinematicsError::InvalidParameter("plane u axis is zero"))?;
        let v_perp = v - u.as_ref() * v.dot(&u);
        let v = UnitVec3::try_new(v_perp, 1e-9).ok_or(KinematicsError::InvalidParameter("plane axes are parallel"))?;
        Ok(Self { origin, u, v })
    }

    pub fn lift(&self, p: &na::Vector2<f64>) -> Point3 {
        self.origin + self.u.as_ref() * p.x + self.v.as_ref() * p.y
    }

    pub fn normal(&self) -> UnitVec3 {
        UnitVec3::new_normalize(self.u.cross(&self.v))
    }
}

/// Planar four-bar. The input pivot sits at the plane origin, the output
/// pivot at `ground` along `ground_angle` from the plane's u axis. The
/// coupler point is offset from the coupler-input joint by `along` the
/// coupler and `perp` to its left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourBarLinkage {
    pub ground: f64,
    pub ground_angle: f64,
    pub input: f64,
    pub coupler: f64,
    pub output: f64,
    pub coupler_point: (f64, f64),
    pub frame: PlaneFrame,
}

/// Solved joint positions of a four-bar in plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourBarPose {
    pub input_joint: na::Vector2<f64>,
    pub output_joint: na::Vector2<f64>,
    pub output_pivot: na::Vector2<f64>,
    pub coupler_point: na::Vector2<f64>,
    /// Orientation of the coupler link (rad from the plane u axis).
    pub coupler_angle: f64,
}

impl FourBarLinkage {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let lengths = [self.ground, self.input, self.coupler, self.output];
        if lengths.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(KinematicsError::InvalidParameter("four-bar link lengths must be positive"));
        }
        Ok(())
    }

    pub fn output_pivot(&self) -> na::Vector2<f64> {
        na::Vector2::new(self.ground_angle.cos(), self.ground_angle.sin()) * self.ground
    }

    pub fn solve(&self, input_angle: f64, branch: Branch) -> Result<FourBarPose, KinematicsError> {
        let b = na::Vector2::new(input_angle.cos(), input_angle.sin()) * self.input;
        let d = self.output_pivot();
        let bd = d - b;
        let e = bd.norm();
        let (lc, lo) = (self.coupler, self.output);
        if e > lc + lo || e < (lc - lo).abs() || e == 0.0 {
            return Err(KinematicsError::Unassemblable(input_angle));
        }
        let x = (lc * lc - lo * lo + e * e) / (2.0 * e);
        let h = (lc * lc - x * x).max(0.0).sqrt();
        let ex = bd / e;
        let ep = na::Vector2::new(-ex.y, ex.x);
        let sign = match branch {
            Branch::Open => 1.0,
            Branch::Crossed => -1.0,
        };
        let c = b + ex * x + ep * (sign * h);
        let ec = (c - b) / lc;
        let ecp = na::Vector2::new(-ec.y, ec.x);
        let p = b + ec * self.coupler_point.0 + ecp * self.coupler_point.1;
        Ok(FourBarPose {
            input_joint: b,
            output_joint: c,
            output_pivot: d,
            coupler_point: p,
            coupler_angle: ec.y.atan2(ec.x),
        })
    }

    /// Largest violation of the two loop-closure length constraints (mm).
    pub fn closure_residual(&self, pose: &FourBarPose) -> f64 {
        let coupler = ((pose.output_joint - pose.input_joint).norm() - self.coupler).abs();
        let output = ((pose.output_joint - pose.output_pivot).norm() - self.output).abs();
        let input = (pose.input_joint.norm() - self.input).abs();
        coupler.max(output).max(input)
    }
}

/// Coupler point of the four-bar in hand coordinates.
pub fn four_bar_forward(linkage: &FourBarLinkage, input_angle: f64, branch: Branch) -> Result<Point3, KinematicsError> {
    linkage.validate()?;
    let pose = linkage.solve(input_angle, branch)?;
    Ok(linkage.frame.lift(&pose.coupler_point))
}

/// Samples the coupler curve at `steps` evenly spaced input angles.
pub fn four_bar_trajectory(
    linkage: &FourBarLinkage,
    branch: Branch,
    input_range: (f64, f64),
    steps: usize,
    rule: &NormalRule,
) -> Result<Trajectory, KinematicsError> {
    if steps < 2 {
        return Err(KinematicsError::TooFewSamples(steps));
    }
    let angles = linspace(input_range.0, input_range.1, steps);
    let points = angles
        .iter()
        .map(|&a| four_bar_forward(linkage, a, branch))
        .collect::<Result<Vec<_>, _>>()?;
    Trajectory::from_points(points, angles, rule)
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|k| if k == n - 1 { b } else { a + step * k as f64 }).collect()
}

/// Slider-crank converting linear actuator travel into crank rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PistonCrank {
    pub crank_radius: f64,
    pub rod_length: f64,
}

impl PistonCrank {
    pub fn new(crank_radius: f64, rod_length: f64) -> Result<Self, KinematicsError> {
        if !(crank_radius > 0.0) {
            return Err(KinematicsError::InvalidParameter("crank radius must be positive"));
        }
        if !(rod_length > crank_radius) {
            return Err(KinematicsError::InvalidParameter("rod must be longer than the crank"));
        }
        Ok(Self { crank_radius, rod_length })
    }

    /// Slider distance from the crank pivot: `r cos phi + sqrt(l^2 - r^2 sin^2 phi)`.
    pub fn slider_position(&self, crank_angle: f64) -> f64 {
        let (r, l) = (self.crank_radius, self.rod_length);
        let s = crank_angle.sin();
        r * crank_angle.cos() + (l * l - r * r * s * s).sqrt()
    }

    pub fn stroke(&self) -> (f64, f64) {
        (self.rod_length - self.crank_radius, self.rod_length + self.crank_radius)
    }
}

/// Crank angle in [0, pi] for a slider position.
pub fn piston_crank_angle(pc: &PistonCrank, slider_pos: f64) -> Result<f64, KinematicsError> {
    let (min, max) = pc.stroke();
    let tol = EXACT_TOL * max;
    if !(slider_pos >= min - tol && slider_pos <= max + tol) {
        return Err(KinematicsError::OutOfStroke { position: slider_pos, min, max });
    }
    let (r, l) = (pc.crank_radius, pc.rod_length);
    let x = slider_pos;
    // Law of cosines in the crank/rod/slider triangle.
    let cos_phi = ((r * r + x * x - l * l) / (2.0 * r * x)).clamp(-1.0, 1.0);
    Ok(cos_phi.acos())
}

/// Ring/little finger differential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Differential {
    pub ring_constrained: bool,
    pub little_constrained: bool,
    /// Relative share (ring, little) when neither finger is blocked.
    pub ratio: (f64, f64),
}

impl Default for Differential {
    fn default() -> Self {
        Self { ring_constrained: false, little_constrained: false, ratio: (1.0, 1.0) }
    }
}

/// Splits actuator travel between ring and little fingers. Total finger
/// travel is twice the actuator travel; a blocked finger passes its share to
/// the free one.
pub fn differential_distribute(d: &Differential, actuator_delta: f64) -> Result<(f64, f64), KinematicsError> {
    let total = 2.0 * actuator_delta;
    match (d.ring_constrained, d.little_constrained) {
        (true, true) => Err(KinematicsError::Stall),
        (true, false) => Ok((0.0, total)),
        (false, true) => Ok((total, 0.0)),
        (false, false) => {
            let (wr, wl) = d.ratio;
            if !(wr >= 0.0 && wl >= 0.0 && wr + wl > 0.0) {
                return Err(KinematicsError::InvalidParameter("differential ratio must be non-negative"));
            }
            let ring = total * wr / (wr + wl);
            Ok((ring, total - ring))
        }
    }
}

/// Placement of the thumb tip relative to its rotation axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThumbTip {
    pub radial: f64,
    pub axial: f64,
    pub phase: f64,
}

/// Thumb tip geometry in the axis frame, ready to be placed by any [`AxisConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct ThumbModel {
    tip: ThumbTip,
    angles: Vec<f64>,
    local_points: Vec<Point3>,
}

impl ThumbModel {
    /// Thumb rotating through the given axis angles.
    pub fn new(tip: ThumbTip, angles: Vec<f64>) -> Result<Self, KinematicsError> {
        if !(tip.radial.abs() > 0.0) {
            return Err(KinematicsError::DegenerateThumb);
        }
        if angles.len() < 2 {
            return Err(KinematicsError::TooFewSamples(angles.len()));
        }
        let local_points: Vec<Point3> = angles
            .iter()
            .map(|a| {
                let phi = tip.phase + a;
                Point3::new(tip.radial * phi.cos(), tip.radial * phi.sin(), tip.axial)
            })
            .collect();
        // rejects sweeps that revisit a point
        tangents(&local_points)?;
        Ok(Self { tip, angles, local_points })
    }

    pub fn uniform(tip: ThumbTip, sweep: (f64, f64), steps: usize) -> Result<Self, KinematicsError> {
        if steps < 2 {
            return Err(KinematicsError::TooFewSamples(steps));
        }
        if !(sweep.0 != sweep.1) {
            return Err(KinematicsError::InvalidParameter("thumb sweep is degenerate"));
        }
        Self::new(tip, linspace(sweep.0, sweep.1, steps))
    }

    /// Thumb driven by a piston-crank over the given slider positions; the
    /// crank angle adds to `crank_offset` to give the axis angle.
    pub fn from_piston_crank(
        tip: ThumbTip,
        pc: &PistonCrank,
        stroke: (f64, f64),
        crank_offset: f64,
        steps: usize,
    ) -> Result<Self, KinematicsError> {
        if steps < 2 {
            return Err(KinematicsError::TooFewSamples(steps));
        }
        let angles = linspace(stroke.0, stroke.1, steps)
            .into_iter()
            .map(|x| piston_crank_angle(pc, x).map(|phi| phi + crank_offset))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(tip, angles)
    }

    pub fn tip(&self) -> &ThumbTip {
        &self.tip
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.local_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local_points.is_empty()
    }

    /// World-frame tip centres for an axis placement, without building normals.
    pub fn place_points(&self, cfg: &AxisConfig, out: &mut Vec<Point3>) {
        let frame = axis_frame(cfg);
        out.clear();
        out.extend(self.local_points.iter().map(|p| frame * p));
    }

    /// Full trajectory for an axis placement. The thumb pad leads its motion
    /// and its side normal is the rotation axis.
    pub fn place(&self, cfg: &AxisConfig) -> Trajectory {
        let mut points = Vec::with_capacity(self.len());
        self.place_points(cfg, &mut points);
        let axis = UnitVec3::new_normalize(axis_frame(cfg).rotation * Vec3::z());
        let tangents = tangents(&points).expect("thumb samples are distinct by construction");
        let samples = points
            .into_iter()
            .zip(tangents)
            .map(|(center, tangent)| TrajectorySample { center, tangent, pad_normal: tangent, side_normal: axis })
            .collect();
        Trajectory { samples, params: self.angles.clone() }
    }
}

/// Circular thumb-tip trajectory about the axis of `axis_frame(axis)`.
pub fn thumb_trajectory(
    axis: &AxisConfig,
    tip: ThumbTip,
    sweep: (f64, f64),
    steps: usize,
) -> Result<Trajectory, KinematicsError> {
    Ok(ThumbModel::uniform(tip, sweep, steps)?.place(axis))
}
