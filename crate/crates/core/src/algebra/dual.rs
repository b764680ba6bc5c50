use std::ops::Mul;

use nalgebra::Vector3;

use super::{Quaternion, UNIT_TOLERANCE};

/// A dual quaternion `real + ε·dual` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualQuaternion {
    pub real: Quaternion,
    pub dual: Quaternion,
}

impl DualQuaternion {
    pub const IDENTITY: DualQuaternion = DualQuaternion {
        real: Quaternion::ONE,
        dual: Quaternion::ZERO,
    };

    pub fn new(real: Quaternion, dual: Quaternion) -> Self {
        DualQuaternion { real, dual }
    }

    /// Embeds a point as `1 + ε·(ix + jy + kz)`.
    pub fn from_point(p: &Vector3<f64>) -> Self {
        DualQuaternion::new(Quaternion::ONE, Quaternion::pure(p))
    }

    /// Quaternion conjugate `q̄₁ + ε·q̄₂`.
    pub fn conj(self) -> Self {
        DualQuaternion::new(self.real.conj(), self.dual.conj())
    }

    /// Total conjugate `q̄₁ - ε·q̄₂` (quaternion and dual conjugate combined).
    ///
    /// Sandwiching a point between a unit dual quaternion and its total
    /// conjugate applies the full rigid motion; the plain quaternion conjugate
    /// cancels the translation.
    pub fn total_conj(self) -> Self {
        DualQuaternion::new(self.real.conj(), -self.dual.conj())
    }

    /// Whether the real part is a unit quaternion.
    pub fn has_unit_real(self) -> bool {
        (self.real.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }
}

impl Mul for DualQuaternion {
    type Output = DualQuaternion;
    fn mul(self, o: DualQuaternion) -> DualQuaternion {
        DualQuaternion::new(self.real * o.real, self.real * o.dual + self.dual * o.real)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dq() -> impl Strategy<Value = DualQuaternion> {
        (prop::array::uniform4(-2.0..2.0f64), prop::array::uniform4(-2.0..2.0f64))
            .prop_map(|(r, d)| DualQuaternion::new(r.into(), d.into()))
    }

    #[test]
    fn identity_and_nilpotent_epsilon() {
        let a = DualQuaternion::new(
            Quaternion::new(0.1, 0.2, -0.3, 0.4),
            Quaternion::new(1.0, -2.0, 0.5, 0.0),
        );
        assert_eq!(DualQuaternion::IDENTITY * a, a);
        assert_eq!(a * DualQuaternion::IDENTITY, a);
        let e1 = DualQuaternion::new(Quaternion::ZERO, Quaternion::new(1.0, 2.0, 3.0, 4.0));
        let e2 = DualQuaternion::new(Quaternion::ZERO, Quaternion::new(-1.0, 0.5, 3.0, 2.0));
        let p = e1 * e2;
        assert_eq!(p.real, Quaternion::ZERO);
        assert_eq!(p.dual, Quaternion::ZERO);
    }

    #[test]
    fn conjugates() {
        let a = DualQuaternion::new(Quaternion::new(1.0, 2.0, 3.0, 4.0), Quaternion::new(5.0, 6.0, 7.0, 8.0));
        assert_eq!(a.conj().dual, Quaternion::new(5.0, -6.0, -7.0, -8.0));
        assert_eq!(a.total_conj().dual, Quaternion::new(-5.0, 6.0, 7.0, 8.0));
    }

    proptest! {
        #[test]
        fn product_is_associative(a in dq(), b in dq(), c in dq()) {
            let l = (a * b) * c;
            let r = a * (b * c);
            prop_assert!((l.real - r.real).to_vector().amax() <= 1e-12);
            prop_assert!((l.dual - r.dual).to_vector().amax() <= 1e-12);
        }
    }
}
