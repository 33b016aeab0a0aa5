//! The discretized hand: fingertip radii, the thumb tip model, and the
//! index/middle fingertip trajectories.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{AxisConfig, Point3};
use crate::kinematics::{ThumbModel, Trajectory};

#[derive(Debug, Error)]
pub enum HandError {
    #[error("{finger} fingertip radius must be positive, got {value}")]
    Radius { finger: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerRadii {
    pub thumb: f64,
    pub index: f64,
    pub middle: f64,
}

#[derive(Debug, Clone)]
pub struct HandModel {
    pub radii: FingerRadii,
    pub thumb: ThumbModel,
    /// Index fingertip over its full motion range, used for grasp validation.
    pub index: Trajectory,
    pub middle: Trajectory,
    /// Index poses held during precision-lateral manipulation.
    pub manipulation_index: Trajectory,
}

impl HandModel {
    pub fn new(
        radii: FingerRadii,
        thumb: ThumbModel,
        index: Trajectory,
        middle: Trajectory,
        manipulation_index: Option<Trajectory>,
    ) -> Result<Self, HandError> {
        for (finger, value) in [("thumb", radii.thumb), ("index", radii.index), ("middle", radii.middle)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(HandError::Radius { finger, value });
            }
        }
        let manipulation_index = manipulation_index.unwrap_or_else(|| index.clone());
        Ok(Self { radii, thumb, index, middle, manipulation_index })
    }

    pub fn thumb_trajectory(&self, cfg: &AxisConfig) -> Trajectory {
        self.thumb.place(cfg)
    }

    pub fn thumb_points(&self, cfg: &AxisConfig, out: &mut Vec<Point3>) {
        self.thumb.place_points(cfg, out)
    }
}
