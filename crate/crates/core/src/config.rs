//! Run configuration: a JSON document with explicit units in every field
//! name (`_mm`, `_deg`, `_n`, `_pa`). Degrees are converted to radians when
//! the configuration is built into a [`Problem`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point3, UnitVec3, Vec3};
use crate::grasp::{GraspError, GraspRequirements, RadiusRange};
use crate::hand::{FingerRadii, HandError, HandModel};
use crate::kinematics::{
    four_bar_trajectory, read_polyline, Branch, FourBarLinkage, KinematicsError, NormalRule, PistonCrank, PlaneFrame,
    ThumbModel, ThumbTip, Trajectory,
};
use crate::manip::{DeformationModel, ManipError};
use crate::optimizer::{GridAxis, GridDim, OptimizeError, Problem, SearchGrid};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: field `{field}`: {message}")]
    Parse { path: PathBuf, field: String, message: String },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, err: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), message: err.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub hand: HandSpec,
    pub requirements: RequirementsSpec,
    pub deformation: DeformationSpec,
    pub grid: GridSpec,
    pub discretization: Discretization,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandSpec {
    pub radii_mm: FingerRadii,
    /// Direction from the fingers towards the thumb side of the hand.
    pub thumb_side: [f64; 3],
    #[serde(default)]
    pub pad_angle_deg: f64,
    /// Tilt of the pad normal towards the thumb side.
    #[serde(default)]
    pub pad_tilt_deg: f64,
    pub thumb: ThumbSpec,
    pub index: FingerSource,
    pub middle: FingerSource,
    /// Index poses held during manipulation; defaults to the full index motion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manipulation_index: Option<FingerSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThumbSpec {
    pub radial_mm: f64,
    pub axial_mm: f64,
    #[serde(default)]
    pub phase_deg: f64,
    pub drive: ThumbDrive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ThumbDrive {
    /// Uniform steps of the axis angle.
    Sweep { range_deg: [f64; 2] },
    /// Uniform steps of linear actuator travel through a piston-crank.
    PistonCrank { crank_radius_mm: f64, rod_length_mm: f64, stroke_mm: [f64; 2], crank_offset_deg: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FingerSource {
    FourBar(FourBarSpec),
    /// CSV polyline, path relative to the configuration file.
    Polyline { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourBarSpec {
    /// Input pivot in hand coordinates.
    pub origin_mm: [f64; 3],
    /// In-plane axis from which link angles are measured.
    pub u_axis: [f64; 3],
    /// Second in-plane axis (positive input rotation turns u towards v).
    pub v_axis: [f64; 3],
    pub ground_mm: f64,
    pub ground_angle_deg: f64,
    pub input_mm: f64,
    pub coupler_mm: f64,
    pub output_mm: f64,
    /// Fingertip centre offset from the coupler-input joint: (along coupler, left of coupler).
    pub coupler_point_mm: [f64; 2],
    pub branch: Branch,
    pub input_range_deg: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequirementsSpec {
    pub precision_radius_mm: [f64; 2],
    pub lateral_radius_mm: [f64; 2],
    pub tripod_radius_mm: [f64; 2],
    pub manipulation_width_mm: [f64; 2],
    pub theta_min_deg: f64,
    pub alpha_perm_deg: f64,
    #[serde(default = "default_force_limit")]
    pub force_dir_limit_deg: f64,
}

fn default_force_limit() -> f64 {
    45.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformationSpec {
    pub pinch_force_n: f64,
    pub youngs_modulus_pa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRangeSpec {
    pub range: [f64; 2],
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_mm: AxisRangeSpec,
    pub y_mm: AxisRangeSpec,
    pub z_mm: AxisRangeSpec,
    pub roll_deg: AxisRangeSpec,
    pub pitch_deg: AxisRangeSpec,
    pub yaw_deg: AxisRangeSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub thumb_steps: usize,
    /// Samples for four-bar fingers; polylines keep their own rows.
    pub index_steps: usize,
    pub middle_steps: usize,
    pub manipulation_index_steps: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self { thumb_steps: 100, index_steps: 100, middle_steps: 100, manipulation_index_steps: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<CheckpointSpec>,
}

fn default_top_k() -> usize {
    10
}

impl Default for RunSpec {
    fn default() -> Self {
        Self { workers: None, top_k: default_top_k(), checkpoint: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointSpec {
    pub path: PathBuf,
    /// Configurations evaluated between checkpoint writes.
    pub every: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Grid dimensions spanned by the |W| heatmap.
    pub heatmap_dims: [GridDim; 2],
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), heatmap_dims: [GridDim::X, GridDim::Y] }
    }
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn range(field: &str, r: [f64; 2]) -> Result<RadiusRange, ConfigError> {
    if !(r[0].is_finite() && r[1].is_finite()) {
        return Err(invalid(field, "bounds must be finite"));
    }
    Ok(RadiusRange::new(r[0], r[1]))
}

impl RequirementsSpec {
    pub fn to_requirements(&self) -> Result<GraspRequirements, ConfigError> {
        let req = GraspRequirements {
            precision: range("requirements.precision_radius_mm", self.precision_radius_mm)?,
            lateral: range("requirements.lateral_radius_mm", self.lateral_radius_mm)?,
            tripod: range("requirements.tripod_radius_mm", self.tripod_radius_mm)?,
            manipulation_width: range("requirements.manipulation_width_mm", self.manipulation_width_mm)?,
            theta_min: self.theta_min_deg.to_radians(),
            alpha_perm: self.alpha_perm_deg.to_radians(),
            force_dir_limit: self.force_dir_limit_deg.to_radians(),
        };
        req.validate().map_err(|e: GraspError| invalid("requirements", e))?;
        Ok(req)
    }
}

impl FourBarSpec {
    pub fn linkage(&self) -> Result<FourBarLinkage, KinematicsError> {
        let frame = PlaneFrame::new(Point3::from(vec3(self.origin_mm)), vec3(self.u_axis), vec3(self.v_axis))?;
        let linkage = FourBarLinkage {
            ground: self.ground_mm,
            ground_angle: self.ground_angle_deg.to_radians(),
            input: self.input_mm,
            coupler: self.coupler_mm,
            output: self.output_mm,
            coupler_point: (self.coupler_point_mm[0], self.coupler_point_mm[1]),
            frame,
        };
        linkage.validate()?;
        Ok(linkage)
    }
}

impl FingerSource {
    pub fn trajectory(&self, steps: usize, rule: &NormalRule, base_dir: &Path) -> Result<Trajectory, KinematicsError> {
        match self {
            FingerSource::FourBar(spec) => {
                let linkage = spec.linkage()?;
                let r = spec.input_range_deg;
                four_bar_trajectory(&linkage, spec.branch, (r[0].to_radians(), r[1].to_radians()), steps, rule)
            }
            FingerSource::Polyline { path } => {
                let file = fs::File::open(base_dir.join(path))?;
                read_polyline(file, rule)
            }
        }
    }
}

impl ThumbSpec {
    pub fn model(&self, steps: usize) -> Result<ThumbModel, KinematicsError> {
        let tip = ThumbTip { radial: self.radial_mm, axial: self.axial_mm, phase: self.phase_deg.to_radians() };
        match &self.drive {
            ThumbDrive::Sweep { range_deg } => {
                ThumbModel::uniform(tip, (range_deg[0].to_radians(), range_deg[1].to_radians()), steps)
            }
            ThumbDrive::PistonCrank { crank_radius_mm, rod_length_mm, stroke_mm, crank_offset_deg } => {
                let pc = PistonCrank::new(*crank_radius_mm, *rod_length_mm)?;
                ThumbModel::from_piston_crank(tip, &pc, (stroke_mm[0], stroke_mm[1]), crank_offset_deg.to_radians(), steps)
            }
        }
    }
}

impl HandSpec {
    pub fn build(&self, disc: &Discretization, base_dir: &Path) -> Result<HandModel, ConfigError> {
        let side = UnitVec3::try_new(vec3(self.thumb_side), 1e-12).ok_or_else(|| invalid("hand.thumb_side", "zero vector"))?;
        let rule = NormalRule { thumb_side: side, pad_angle: self.pad_angle_deg.to_radians(), pad_tilt: self.pad_tilt_deg.to_radians() };
        let thumb = self.thumb.model(disc.thumb_steps).map_err(|e| invalid("hand.thumb", e))?;
        let index = self.index.trajectory(disc.index_steps, &rule, base_dir).map_err(|e| invalid("hand.index", e))?;
        let middle = self.middle.trajectory(disc.middle_steps, &rule, base_dir).map_err(|e| invalid("hand.middle", e))?;
        let manipulation_index = self
            .manipulation_index
            .as_ref()
            .map(|s| s.trajectory(disc.manipulation_index_steps, &rule, base_dir))
            .transpose()
            .map_err(|e| invalid("hand.manipulation_index", e))?;
        HandModel::new(self.radii_mm, thumb, index, middle, manipulation_index)
            .map_err(|e: HandError| invalid("hand.radii_mm", e))
    }
}

impl AxisRangeSpec {
    fn axis(&self, field: &str, to_internal: fn(f64) -> f64) -> Result<GridAxis, ConfigError> {
        if !(self.range[0].is_finite() && self.range[1].is_finite()) {
            return Err(invalid(field, "range must be finite"));
        }
        if self.steps == 0 {
            return Err(invalid(field, "steps must be at least 1"));
        }
        Ok(GridAxis { lo: to_internal(self.range[0]), hi: to_internal(self.range[1]), steps: self.steps })
    }
}

impl GridSpec {
    pub fn to_grid(&self) -> Result<SearchGrid, ConfigError> {
        let mm = |v: f64| v;
        let rad = |v: f64| v.to_radians();
        SearchGrid::new([
            self.x_mm.axis("grid.x_mm", mm)?,
            self.y_mm.axis("grid.y_mm", mm)?,
            self.z_mm.axis("grid.z_mm", mm)?,
            self.roll_deg.axis("grid.roll_deg", rad)?,
            self.pitch_deg.axis("grid.pitch_deg", rad)?,
            self.yaw_deg.axis("grid.yaw_deg", rad)?,
        ])
        .map_err(|e: OptimizeError| invalid("grid", e))
    }

    /// Same bounds with the step counts that give 19,200,000 configurations.
    pub fn with_full_scale_steps(&self) -> Self {
        let mut g = self.clone();
        for (axis, steps) in [
            (&mut g.x_mm, 20),
            (&mut g.y_mm, 20),
            (&mut g.z_mm, 20),
            (&mut g.roll_deg, 8),
            (&mut g.pitch_deg, 15),
            (&mut g.yaw_deg, 20),
        ] {
            axis.steps = steps;
        }
        g
    }

    pub fn with_uniform_steps(&self, steps: usize) -> Self {
        let mut g = self.clone();
        for axis in [&mut g.x_mm, &mut g.y_mm, &mut g.z_mm, &mut g.roll_deg, &mut g.pitch_deg, &mut g.yaw_deg] {
            axis.steps = steps;
        }
        g
    }
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Builds the hand, requirements and grid. Relative polyline paths
    /// resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<Problem, ConfigError> {
        let hand = self.hand.build(&self.discretization, base_dir)?;
        let req = self.requirements.to_requirements()?;
        let deformation = DeformationModel {
            pinch_force_n: self.deformation.pinch_force_n,
            youngs_modulus_pa: self.deformation.youngs_modulus_pa,
        };
        let delta_m = deformation.delta_m().map_err(|e: ManipError| invalid("deformation", e))?;
        let grid = self.grid.to_grid()?;
        if let Some(cp) = &self.run.checkpoint {
            if cp.every == 0 {
                return Err(invalid("run.checkpoint.every", "must be positive"));
            }
        }
        Ok(Problem { hand, req, delta_m, grid, discretization: self.discretization })
    }

    /// Reference hand scaled to a 130 x 210 mm prosthesis. The linkage
    /// dimensions, thumb offset and grid bounds are modelling choices, not
    /// measurements of any particular device.
    pub fn reference() -> Self {
        let finger = |origin: [f64; 3], range: [f64; 2]| {
            FingerSource::FourBar(FourBarSpec {
                origin_mm: origin,
                u_axis: [0.0, 1.0, 0.0],
                v_axis: [0.0, 0.0, 1.0],
                ground_mm: 12.0,
                ground_angle_deg: -100.0,
                input_mm: 45.0,
                coupler_mm: 12.0,
                output_mm: 46.0,
                coupler_point_mm: [0.0, 45.0],
                branch: Branch::Open,
                input_range_deg: range,
            })
        };
        let axis = |lo: f64, hi: f64, steps: usize| AxisRangeSpec { range: [lo, hi], steps };
        RunConfig {
            hand: HandSpec {
                radii_mm: FingerRadii { thumb: 9.0, index: 8.0, middle: 8.0 },
                thumb_side: [1.0, 0.0, 0.0],
                pad_angle_deg: 0.0,
                pad_tilt_deg: 0.0,
                thumb: ThumbSpec {
                    radial_mm: 90.0,
                    axial_mm: 0.0,
                    phase_deg: 0.0,
                    drive: ThumbDrive::Sweep { range_deg: [0.0, 180.0] },
                },
                index: finger([25.0, 110.0, 0.0], [0.0, 90.0]),
                middle: finger([5.0, 115.0, 0.0], [0.0, 90.0]),
                manipulation_index: Some(finger([25.0, 110.0, 0.0], [38.0, 42.0])),
            },
            requirements: RequirementsSpec {
                precision_radius_mm: [0.0, 60.0],
                lateral_radius_mm: [0.0, 30.0],
                tripod_radius_mm: [10.0, 80.0],
                manipulation_width_mm: [0.0, 30.0],
                theta_min_deg: 110.0,
                alpha_perm_deg: 30.0,
                force_dir_limit_deg: 45.0,
            },
            deformation: DeformationSpec { pinch_force_n: 10.0, youngs_modulus_pa: 134.3e3 },
            grid: GridSpec {
                x_mm: axis(60.0, 120.0, 6),
                y_mm: axis(80.0, 140.0, 6),
                z_mm: axis(20.0, 100.0, 6),
                roll_deg: axis(-90.0, 45.0, 6),
                pitch_deg: axis(-30.0, 60.0, 6),
                yaw_deg: axis(-90.0, 90.0, 6),
            },
            discretization: Discretization { thumb_steps: 30, index_steps: 24, middle_steps: 24, manipulation_index_steps: 5 },
            run: RunSpec::default(),
            output: OutputSpec::default(),
        }
    }
}
