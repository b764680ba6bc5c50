use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::{DEGENERATE_NORM, SIGN_EPSILON, UNIT_TOLERANCE};
use crate::error::{MpgError, Result};

/// A quaternion `a + ib + jc + kd`, identified with `[a, b, c, d]` in R⁴.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl From<[f64; 4]> for Quaternion {
    fn from(v: [f64; 4]) -> Self {
        Quaternion::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        q.to_array()
    }
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Quaternion { a, b, c, d }
    }

    /// The canonical basis `e_1..e_4` of R⁴, i.e. `1, i, j, k`.
    pub const fn basis(i: usize) -> Self {
        match i {
            0 => Self::ONE,
            1 => Self::I,
            2 => Self::J,
            _ => Self::K,
        }
    }

    pub fn pure(v: &Vector3<f64>) -> Self {
        Quaternion::new(0.0, v.x, v.y, v.z)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.a, self.b, self.c, self.d)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Quaternion::new(v[0], v[1], v[2], v[3])
    }

    /// Imaginary part `(b, c, d)`.
    pub fn vector_part(self) -> Vector3<f64> {
        Vector3::new(self.b, self.c, self.d)
    }

    pub fn conj(self) -> Self {
        Quaternion::new(self.a, -self.b, -self.c, -self.d)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        // hypot-free: quaternions here are O(1)
        self.norm_squared().sqrt()
    }

    /// Euclidean inner product in R⁴.
    pub fn dot(self, o: Quaternion) -> f64 {
        self.a * o.a + self.b * o.b + self.c * o.c + self.d * o.d
    }

    pub fn scale(self, s: f64) -> Self {
        Quaternion::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn normalize(self) -> Result<UnitQuaternion> {
        UnitQuaternion::new(self)
    }

    pub fn is_finite(self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.a, -self.b, -self.c, -self.d)
    }
}

/// Hamilton product.
impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, q: Quaternion) -> Quaternion {
        let p = self;
        Quaternion::new(
            p.a * q.a - p.b * q.b - p.c * q.c - p.d * q.d,
            p.a * q.b + p.b * q.a + p.c * q.d - p.d * q.c,
            p.a * q.c - p.b * q.d + p.c * q.a + p.d * q.b,
            p.a * q.d + p.b * q.c - p.c * q.b + p.d * q.a,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, s: f64) -> Quaternion {
        self.scale(s)
    }
}

/// A purely imaginary quaternion `ix + jy + kz`, used for translations and points.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImaginaryQuaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ImaginaryQuaternion {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        ImaginaryQuaternion { x, y, z }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        ImaginaryQuaternion::new(v.x, v.y, v.z)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn quaternion(self) -> Quaternion {
        Quaternion::new(0.0, self.x, self.y, self.z)
    }
}

/// A quaternion of norm 1 (within [`UNIT_TOLERANCE`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "[f64; 4]")]
pub struct UnitQuaternion(Quaternion);

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> Self {
        q.0.to_array()
    }
}

impl<'de> Deserialize<'de> for UnitQuaternion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = <[f64; 4]>::deserialize(d)?;
        UnitQuaternion::new(Quaternion::from(raw)).map_err(serde::de::Error::custom)
    }
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion(Quaternion::ONE);

    /// Normalizes `q`.
    pub fn new(q: Quaternion) -> Result<Self> {
        let norm = q.norm();
        if !(norm > DEGENERATE_NORM) || !q.is_finite() {
            return Err(MpgError::DegenerateQuaternion { norm });
        }
        // already-unit input is kept bit-for-bit so serialization round-trips
        if (norm - 1.0).abs() <= 8.0 * f64::EPSILON {
            return Ok(UnitQuaternion(q));
        }
        Ok(UnitQuaternion(q.scale(1.0 / norm)))
    }

    /// Wraps `q` after checking that it already has unit norm.
    pub fn from_unit(q: Quaternion) -> Result<Self> {
        let norm = q.norm();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(MpgError::NonUnitTangentPoint { norm });
        }
        Ok(UnitQuaternion(q.scale(1.0 / norm)))
    }

    /// Caller guarantees `‖q‖ = 1`.
    pub(crate) fn new_unchecked(q: Quaternion) -> Self {
        UnitQuaternion(q)
    }

    /// `(cos(θ/2), sin(θ/2)·axis)` for a unit `axis`.
    pub fn from_axis_angle(axis: &Vector3<f64>, theta: f64) -> Result<Self> {
        let norm = axis.norm();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(MpgError::NonUnitAxis { norm });
        }
        let (s, c) = (0.5 * theta).sin_cos();
        Ok(UnitQuaternion(Quaternion::new(c, s * axis.x, s * axis.y, s * axis.z)))
    }

    /// Rotation by the vector's norm about its direction; zero maps to identity.
    pub fn from_rotation_vector(v: &Vector3<f64>) -> Self {
        let theta = v.norm();
        if theta < 1e-300 {
            return Self::IDENTITY;
        }
        Self::from_axis_angle(&(v / theta), theta).expect("normalized axis")
    }

    pub fn quaternion(self) -> Quaternion {
        self.0
    }

    pub fn to_array(self) -> [f64; 4] {
        self.0.to_array()
    }

    pub fn conj(self) -> Self {
        UnitQuaternion(self.0.conj())
    }

    pub fn dot(self, o: UnitQuaternion) -> f64 {
        self.0.dot(o.0)
    }

    /// `q` or `-q`, whichever has its first coefficient with magnitude above
    /// [`SIGN_EPSILON`] positive.
    pub fn canonical(self) -> Self {
        let flip = self
            .0
            .to_array()
            .into_iter()
            .find(|c| c.abs() > SIGN_EPSILON)
            .is_some_and(|c| c < 0.0);
        let q = if flip { -self.0 } else { self.0 };
        // adding +0.0 turns -0.0 into 0.0 so serialized forms are unique
        UnitQuaternion(Quaternion::new(q.a + 0.0, q.b + 0.0, q.c + 0.0, q.d + 0.0))
    }

    /// `q * p * q̄` for a point `p`.
    pub fn rotate(self, p: &Vector3<f64>) -> Vector3<f64> {
        (self.0 * Quaternion::pure(p) * self.0.conj()).vector_part()
    }

    /// Rotation matrix `R(q)` with `R(q)·p = q*p*q̄`.
    pub fn to_rotation_matrix(self) -> Matrix3<f64> {
        let Quaternion { a, b, c, d } = self.0;
        Matrix3::new(
            a * a + b * b - c * c - d * d,
            2.0 * (b * c - a * d),
            2.0 * (b * d + a * c),
            2.0 * (b * c + a * d),
            a * a - b * b + c * c - d * d,
            2.0 * (c * d - a * b),
            2.0 * (b * d - a * c),
            2.0 * (c * d + a * b),
            a * a - b * b - c * c + d * d,
        )
    }

    /// Rotation angle in `[0, π]`, independent of the sign of `q`.
    pub fn angle(self) -> f64 {
        2.0 * self.0.vector_part().norm().atan2(self.0.a.abs())
    }

    /// Angle between the two rotations, in `[0, π]`.
    pub fn angle_to(self, o: UnitQuaternion) -> f64 {
        (self.conj() * o).angle()
    }
}

impl Neg for UnitQuaternion {
    type Output = UnitQuaternion;
    fn neg(self) -> UnitQuaternion {
        UnitQuaternion(-self.0)
    }
}

/// Product of rotations, renormalized to stop drift along long chains.
impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    fn mul(self, o: UnitQuaternion) -> UnitQuaternion {
        let p = self.0 * o.0;
        UnitQuaternion(p.scale(1.0 / p.norm()))
    }
}
