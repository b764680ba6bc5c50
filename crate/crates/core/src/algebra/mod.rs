//! Quaternion and dual-quaternion algebra for rotations and rigid motions.
//!
//! Rotations are unit quaternions `q = a + ib + jc + kd`; `q` and `-q` describe
//! the same rotation. Rigid motions are stored as a rotation plus a translation
//! vector and converted to dual quaternions `q_r + ε·½·q_t·q_r` when composed.

mod dual;
mod motion;
mod quaternion;

pub use dual::DualQuaternion;
pub use motion::RigidMotion;
pub use quaternion::{ImaginaryQuaternion, Quaternion, UnitQuaternion};

/// Tolerance on `|‖q‖ - 1|` for anything treated as a unit quaternion.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Norm below which a quaternion cannot be normalized.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Coefficients with magnitude at or below this are skipped by the sign rule.
pub const SIGN_EPSILON: f64 = 1e-9;
