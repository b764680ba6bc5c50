use nalgebra::{Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use super::{DualQuaternion, ImaginaryQuaternion, UnitQuaternion};
use crate::error::{MpgError, Result};

/// A rigid motion: rotation (canonical sign) followed by a translation.
///
/// Serialized as `{"q": [a, b, c, d], "t": [x, y, z]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MotionJson", into = "MotionJson")]
pub struct RigidMotion {
    rotation: UnitQuaternion,
    translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct MotionJson {
    q: [f64; 4],
    t: [f64; 3],
}

impl TryFrom<MotionJson> for RigidMotion {
    type Error = MpgError;
    fn try_from(j: MotionJson) -> Result<Self> {
        if !j.t.iter().all(|v| v.is_finite()) {
            return Err(MpgError::field("t", "translation must be finite"));
        }
        let q = UnitQuaternion::new(j.q.into()).map_err(|e| MpgError::field("q", e.to_string()))?;
        Ok(RigidMotion::new(q, Vector3::from(j.t)))
    }
}

impl From<RigidMotion> for MotionJson {
    fn from(m: RigidMotion) -> Self {
        MotionJson {
            q: m.rotation.to_array(),
            t: m.translation.into(),
        }
    }
}

impl Default for RigidMotion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidMotion {
    pub const IDENTITY: RigidMotion = RigidMotion {
        rotation: UnitQuaternion::IDENTITY,
        translation: Vector3::new(0.0, 0.0, 0.0),
    };

    pub fn new(rotation: UnitQuaternion, translation: Vector3<f64>) -> Self {
        RigidMotion {
            rotation: rotation.canonical(),
            translation,
        }
    }

    pub fn from_rotation(rotation: UnitQuaternion) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::IDENTITY, translation)
    }

    pub fn rotation(&self) -> UnitQuaternion {
        self.rotation
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    /// `q_r + ε·½·q_t*q_r`.
    pub fn to_dual(&self) -> DualQuaternion {
        let r = self.rotation.quaternion();
        let t = ImaginaryQuaternion::from_vector(&self.translation).quaternion();
        DualQuaternion::new(r, (t * r).scale(0.5))
    }

    /// Inverse of [`RigidMotion::to_dual`]; the translation is `2·dual*conj(real)`.
    pub fn from_dual(dq: DualQuaternion) -> Result<Self> {
        let norm = dq.real.norm();
        if !dq.has_unit_real() {
            return Err(MpgError::NonUnitRotationPart { norm });
        }
        let rotation = UnitQuaternion::new_unchecked(dq.real.scale(1.0 / norm));
        let qt = (dq.dual * rotation.quaternion().conj()).scale(2.0);
        Ok(RigidMotion::new(rotation, qt.vector_part()))
    }

    /// `self ∘ first`: apply `first`, then `self`. Computed as the product of
    /// the dual quaternions.
    pub fn compose(&self, first: &RigidMotion) -> RigidMotion {
        let dq = self.to_dual() * first.to_dual();
        let rotation = UnitQuaternion::new(dq.real).expect("product of unit quaternions");
        let qt = (dq.dual * rotation.quaternion().conj()).scale(2.0);
        RigidMotion::new(rotation, qt.vector_part())
    }

    pub fn inverse(&self) -> RigidMotion {
        let r = self.rotation.conj();
        RigidMotion::new(r, -r.rotate(&self.translation))
    }

    /// Transforms `p` by sandwiching `1 + ε·p` between the motion's dual
    /// quaternion and its total conjugate.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let dq = self.to_dual();
        let out = dq * DualQuaternion::from_point(p) * dq.total_conj();
        out.dual.vector_part()
    }

    /// Homogeneous 4×4 matrix; used for export and as an independent check.
    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut h = Matrix4::identity();
        h.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation.to_rotation_matrix());
        h.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Quaternion;
    use nalgebra::Vector4;
    use proptest::prelude::*;

    fn motion() -> impl Strategy<Value = RigidMotion> {
        (
            prop::array::uniform4(-1.0..1.0f64),
            prop::array::uniform3(-10.0..10.0f64),
        )
            .prop_filter("non-degenerate", |(q, _)| Quaternion::from(*q).norm() > 1e-2)
            .prop_map(|(q, t)| RigidMotion::new(Quaternion::from(q).normalize().unwrap(), Vector3::from(t)))
    }

    fn point() -> impl Strategy<Value = Vector3<f64>> {
        prop::array::uniform3(-10.0..10.0f64).prop_map(Vector3::from)
    }

    fn hom_apply(h: &Matrix4<f64>, p: &Vector3<f64>) -> Vector3<f64> {
        (h * Vector4::new(p.x, p.y, p.z, 1.0)).xyz()
    }

    #[test]
    fn identity_and_pure_translation() {
        let dq = RigidMotion::IDENTITY.to_dual();
        assert_eq!(dq, DualQuaternion::IDENTITY);
        let m = RigidMotion::from_translation(Vector3::new(1.0, 2.0, 3.0));
        let dq = m.to_dual();
        assert_eq!(dq.real, Quaternion::ONE);
        assert_eq!(dq.dual, Quaternion::new(0.0, 0.5, 1.0, 1.5));
        let p = Vector3::new(-1.0, 0.5, 2.0);
        assert_eq!(RigidMotion::IDENTITY.transform_point(&p), p);
        assert_eq!(m.transform_point(&p), p + Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn from_dual_rejects_non_unit_real() {
        let dq = DualQuaternion::new(Quaternion::new(2.0, 0.0, 0.0, 0.0), Quaternion::ZERO);
        assert!(matches!(
            RigidMotion::from_dual(dq),
            Err(MpgError::NonUnitRotationPart { .. })
        ));
    }

    #[test]
    fn json_shape() {
        let m = RigidMotion::new(
            UnitQuaternion::new(Quaternion::new(-1.0, 0.0, 0.0, 0.0)).unwrap(),
            Vector3::new(0.1, 0.2, 0.3),
        );
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"q":[1.0,0.0,0.0,0.0],"t":[0.1,0.2,0.3]}"#);
        assert!(serde_json::from_str::<RigidMotion>(r#"{"q":[0,0,0,0],"t":[0,0,0]}"#).is_err());
    }

    proptest! {
        #[test]
        fn dual_round_trip(m in motion()) {
            let back = RigidMotion::from_dual(m.to_dual()).unwrap();
            prop_assert!((back.rotation.quaternion() - m.rotation.quaternion()).to_vector().amax() <= 1e-13);
            prop_assert!((back.translation - m.translation).amax() <= 1e-13);
            let qt = (m.to_dual().dual * m.rotation.quaternion().conj()).scale(2.0);
            prop_assert!(qt.a.abs() <= 1e-12);
        }

        #[test]
        fn transform_matches_matrix(m in motion(), p in point()) {
            let oracle = m.rotation.to_rotation_matrix() * p + m.translation;
            prop_assert!((m.transform_point(&p) - oracle).amax() <= 1e-12);
        }

        #[test]
        fn compose_matches_homogeneous(m2 in motion(), m1 in motion(), p in point()) {
            let c = m2.compose(&m1);
            let h = m2.to_homogeneous() * m1.to_homogeneous();
            prop_assert!((c.transform_point(&p) - hom_apply(&h, &p)).amax() <= 1e-10);
            let chained = m2.transform_point(&m1.transform_point(&p));
            prop_assert!((c.transform_point(&p) - chained).amax() <= 1e-10);
        }

        #[test]
        fn json_round_trip_is_exact(m in motion()) {
            let s = serde_json::to_string(&m).unwrap();
            let back: RigidMotion = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(serde_json::to_string(&back).unwrap(), s);
        }
    }
}
