//! Thumb rotation-axis placement search for a single-axis prosthetic thumb.
//!
//! A candidate axis placement is kept when the thumb can realize precision,
//! lateral and tripod grasps with the index and middle fingers, and the
//! survivors are ranked by the range of object widths that stay held while
//! the thumb rolls the object between lateral and precision grasps.

pub mod config;
pub mod geom;
pub mod grasp;
pub mod hand;
pub mod kinematics;
pub mod manip;
pub mod optimizer;
pub mod oracle;
pub mod verify;
