//! Tangent-space charts of the unit-quaternion sphere, extended by R³ for
//! translations.
//!
//! A chart at `q0` has basis `b_i = q0 * e_i`. Chart coordinates
//! `(u, v, w, x, y, z)` map to the rotation `(b₁ + u·b₂ + v·b₃ + w·b₄)/√(1+u²+v²+w²)`
//! by central projection, and to the translation `(x, y, z)` unchanged.

use nalgebra::{SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::algebra::{Quaternion, RigidMotion, UnitQuaternion};
use crate::error::{MpgError, Result};

/// Chart coordinates `(u, v, w, x, y, z)`.
pub type TangentCoords = Vector6<f64>;

/// Jacobian of a chart transition.
pub type Jacobian6 = SMatrix<f64, 6, 6>;

/// Jacobian of the composition map, columns ordered `(y₂, y₁)`.
pub type Jacobian6x12 = SMatrix<f64, 6, 12>;

/// Finite-difference step for chart Jacobians.
pub const FD_STEP: f64 = 1e-6;

/// `sin(5°)`: lifting requires `|⟨q, q0⟩|` above this.
pub fn lift_guard() -> f64 {
    5f64.to_radians().sin()
}

pub fn rotation_part(c: &TangentCoords) -> Vector3<f64> {
    c.fixed_rows::<3>(0).into_owned()
}

pub fn translation_part(c: &TangentCoords) -> Vector3<f64> {
    c.fixed_rows::<3>(3).into_owned()
}

pub fn coords(rot: &Vector3<f64>, trans: &Vector3<f64>) -> TangentCoords {
    TangentCoords::new(rot.x, rot.y, rot.z, trans.x, trans.y, trans.z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "UnitQuaternion", into = "UnitQuaternion")]
pub struct TangentChart {
    q0: UnitQuaternion,
    basis: [Quaternion; 4],
}

impl From<UnitQuaternion> for TangentChart {
    fn from(q0: UnitQuaternion) -> Self {
        TangentChart::new(q0)
    }
}

impl From<TangentChart> for UnitQuaternion {
    fn from(c: TangentChart) -> Self {
        c.q0
    }
}

impl TangentChart {
    pub fn new(q0: UnitQuaternion) -> Self {
        let q = q0.quaternion();
        let basis = std::array::from_fn(|i| q * Quaternion::basis(i));
        TangentChart { q0, basis }
    }

    /// Chart at a raw quaternion that must already have unit norm.
    pub fn at(q0: Quaternion) -> Result<Self> {
        Ok(Self::new(UnitQuaternion::from_unit(q0)?))
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::IDENTITY)
    }

    pub fn tangent_point(&self) -> UnitQuaternion {
        self.q0
    }

    pub fn basis(&self) -> &[Quaternion; 4] {
        &self.basis
    }

    /// Rotation at rotation-chart coordinates `(u, v, w)`, not sign-canonicalized.
    fn project_rotation(&self, r: &Vector3<f64>) -> UnitQuaternion {
        let [b1, b2, b3, b4] = self.basis;
        let q = b1 + b2 * r.x + b3 * r.y + b4 * r.z;
        UnitQuaternion::new_unchecked(q.scale(1.0 / (1.0 + r.norm_squared()).sqrt()))
    }

    /// Maps chart coordinates to a rigid motion.
    pub fn project(&self, c: &TangentCoords) -> RigidMotion {
        RigidMotion::new(self.project_rotation(&rotation_part(c)), translation_part(c))
    }

    /// Rotation-chart coordinates of `q` (either sign).
    pub fn lift_rotation(&self, q: UnitQuaternion) -> Result<Vector3<f64>> {
        let q = q.quaternion();
        let inner = q.dot(self.basis[0]);
        if inner.abs() <= lift_guard() {
            return Err(MpgError::NearOrthogonalRotation { inner });
        }
        // the ratio is invariant under q -> -q, so the sign fold is implicit
        Ok(Vector3::new(
            q.dot(self.basis[1]) / inner,
            q.dot(self.basis[2]) / inner,
            q.dot(self.basis[3]) / inner,
        ))
    }

    /// Chart coordinates of `m`.
    pub fn lift(&self, m: &RigidMotion) -> Result<TangentCoords> {
        let r = self.lift_rotation(m.rotation())?;
        Ok(coords(&r, &m.translation()))
    }

    /// Angle between the tangent points with the antipodal fold, in `[0, π/2]`.
    pub fn angle_to(&self, other: &TangentChart) -> f64 {
        self.q0.dot(other.q0).abs().min(1.0).acos()
    }

    /// Coordinates in `target` of the motion at `c` in this chart.
    pub fn transition(&self, target: &TangentChart, c: &TangentCoords) -> Result<TangentCoords> {
        if self == target {
            return Ok(*c);
        }
        let r = target.lift_rotation(self.project_rotation(&rotation_part(c)))?;
        Ok(coords(&r, &translation_part(c)))
    }

    /// Jacobian of [`TangentChart::transition`] at `at` by central differences.
    pub fn transition_jacobian(&self, target: &TangentChart, at: &TangentCoords) -> Result<Jacobian6> {
        self.transition_jacobian_with_step(target, at, FD_STEP)
    }

    /// As [`TangentChart::transition_jacobian`] with an explicit step.
    ///
    /// Only the rotation block is differenced; translations pass through
    /// unchanged so the remaining blocks are exactly identity and zero.
    pub fn transition_jacobian_with_step(
        &self,
        target: &TangentChart,
        at: &TangentCoords,
        h: f64,
    ) -> Result<Jacobian6> {
        let mut jac = Jacobian6::identity();
        if self == target {
            return Ok(jac);
        }
        let r0 = rotation_part(at);
        for k in 0..3 {
            let mut plus = r0;
            let mut minus = r0;
            plus[k] += h;
            minus[k] -= h;
            let fp = target.lift_rotation(self.project_rotation(&plus))?;
            let fm = target.lift_rotation(self.project_rotation(&minus))?;
            let col = (fp - fm) / (2.0 * h);
            jac.fixed_view_mut::<3, 1>(0, k).copy_from(&col);
        }
        Ok(jac)
    }
}

/// Composition of two charts: `g(y₂, y₁) = Π⁻¹_{q₃}(Π_{q₂}(y₂) ∘ Π_{q₁}(y₁))` with
/// `q₃ = q₂*q₁`.
#[derive(Debug, Clone, Copy)]
pub struct CompositionMap {
    pub second: TangentChart,
    pub first: TangentChart,
    pub result: TangentChart,
}

impl CompositionMap {
    pub fn new(second: TangentChart, first: TangentChart) -> Self {
        let q3 = second.tangent_point() * first.tangent_point();
        CompositionMap {
            second,
            first,
            result: TangentChart::new(q3),
        }
    }

    pub fn eval(&self, y2: &TangentCoords, y1: &TangentCoords) -> Result<TangentCoords> {
        let m = self.second.project(y2).compose(&self.first.project(y1));
        self.result.lift(&m)
    }

    /// `g` and its 6×12 Jacobian at `(y₂, y₁)` by central differences.
    pub fn jacobian_at(&self, y2: &TangentCoords, y1: &TangentCoords, h: f64) -> Result<(TangentCoords, Jacobian6x12)> {
        let value = self.eval(y2, y1)?;
        let mut jac = Jacobian6x12::zeros();
        for k in 0..12 {
            let (mut p2, mut p1, mut m2, mut m1) = (*y2, *y1, *y2, *y1);
            if k < 6 {
                p2[k] += h;
                m2[k] -= h;
            } else {
                p1[k - 6] += h;
                m1[k - 6] -= h;
            }
            let col = (self.eval(&p2, &p1)? - self.eval(&m2, &m1)?) / (2.0 * h);
            jac.set_column(k, &col);
        }
        Ok((value, jac))
    }
}

/// `∂g/∂(y₂, y₁)` at `(0, 0)`, where `g(0, 0) = 0`.
pub fn composition_jacobian(second: &TangentChart, first: &TangentChart) -> Jacobian6x12 {
    let map = CompositionMap::new(*second, *first);
    let zero = TangentCoords::zeros();
    let (g0, jac) = map
        .jacobian_at(&zero, &zero, FD_STEP)
        .expect("composition map is liftable near the origin");
    debug_assert!(g0.amax() <= 1e-12, "g(0,0) = {g0}");
    jac
}
