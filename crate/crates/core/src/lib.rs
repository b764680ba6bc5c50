//! Probability densities over rigid motions built from Gaussians on tangent
//! charts of the unit-quaternion sphere, and mixtures of them.
//!
//! The building blocks are, bottom up:
//!
//! * [`algebra`]: quaternions, dual quaternions and rigid motions;
//! * [`chart`]: tangent charts, central projection and chart transitions;
//! * [`pg`]: projected Gaussians with fusion and composition;
//! * [`mixture`]: mixtures of projected Gaussians, dropping and merging;
//! * [`em`]: fitting a mixture to pose samples;
//! * [`grasp`]: probability mass inside a tolerance box and its maximization;
//! * [`pipeline`]: scenario runner, flag export and SVG rendering.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod chart;
pub mod em;
pub mod error;
pub mod grasp;
pub mod linalg;
pub mod mixture;
pub mod normalize;
pub mod pg;
pub mod pipeline;
pub mod settings;

pub use algebra::{DualQuaternion, Quaternion, RigidMotion, UnitQuaternion};
pub use chart::{TangentChart, TangentCoords};
pub use em::{EmConfig, EmTrace};
pub use error::{MpgError, Result};
pub use grasp::{GraspConfig, ToleranceBox};
pub use linalg::{Matrix6, Vector6};
pub use mixture::{Component, Mpg, ReductionReport};
pub use normalize::{McConfig, Normalization};
pub use pg::ProjectedGaussian;
pub use pipeline::{FlagSet, Scenario};
pub use settings::Settings;
