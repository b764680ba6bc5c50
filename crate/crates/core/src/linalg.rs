//! Small fixed-size SPD helpers.

use nalgebra::{Cholesky, SMatrix, SVector, U6};

use crate::error::{MpgError, Result};

pub type Matrix6 = SMatrix<f64, 6, 6>;
pub type Vector6 = SVector<f64, 6>;

/// Added to the diagonal when a covariance is only semi-definite.
pub const SPD_JITTER: f64 = 1e-9;

/// Eigenvalues below `-NEGATIVE_EIGEN_TOLERANCE` are rejected outright.
pub const NEGATIVE_EIGEN_TOLERANCE: f64 = 1e-9;

pub fn asymmetry(m: &Matrix6) -> f64 {
    (m - m.transpose()).amax()
}

pub fn symmetrize(m: &Matrix6) -> Matrix6 {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &Matrix6) -> f64 {
    m.symmetric_eigen().eigenvalues.min()
}

/// Validates a covariance and returns it with its Cholesky factor, adding
/// [`SPD_JITTER`]·I when it is only semi-definite.
pub fn checked_spd(sigma: &Matrix6) -> Result<(Matrix6, Cholesky<f64, U6>)> {
    if !sigma.iter().all(|v| v.is_finite()) {
        return Err(MpgError::field("sigma", "covariance must be finite"));
    }
    let asym = asymmetry(sigma);
    if asym > 1e-12 * sigma.amax().max(1.0) {
        return Err(MpgError::NonSymmetric { asymmetry: asym });
    }
    let sym = symmetrize(sigma);
    let min_eig = min_eigenvalue(&sym);
    if min_eig < -NEGATIVE_EIGEN_TOLERANCE {
        return Err(MpgError::NotPositiveDefinite {
            min_eigenvalue: min_eig,
        });
    }
    if min_eig > 0.0 {
        if let Some(chol) = sym.cholesky() {
            return Ok((sym, chol));
        }
    }
    let jittered = sym + Matrix6::identity() * SPD_JITTER;
    jittered
        .cholesky()
        .map(|chol| (jittered, chol))
        .ok_or(MpgError::NotPositiveDefinite {
            min_eigenvalue: min_eig,
        })
}

/// Inverse of an SPD matrix.
pub fn spd_inverse(m: &Matrix6) -> Result<Matrix6> {
    let (_, chol) = checked_spd(m)?;
    Ok(symmetrize(&chol.inverse()))
}

pub fn log_det(chol: &Cholesky<f64, U6>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Relative Frobenius distance `‖a - b‖ / ‖b‖`.
pub fn frobenius_rel(a: &Matrix6, b: &Matrix6) -> f64 {
    (a - b).norm() / b.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_asymmetric() {
        let mut m = Matrix6::identity();
        m[(2, 2)] = -0.1;
        assert!(matches!(checked_spd(&m), Err(MpgError::NotPositiveDefinite { .. })));
        let mut m = Matrix6::identity();
        m[(0, 1)] = 0.5;
        assert!(matches!(checked_spd(&m), Err(MpgError::NonSymmetric { .. })));
    }

    #[test]
    fn jitters_semidefinite() {
        let mut m = Matrix6::identity();
        m[(4, 4)] = 0.0;
        let (s, _) = checked_spd(&m).unwrap();
        assert_eq!(s[(4, 4)], SPD_JITTER);
        assert_eq!(s[(0, 0)], 1.0 + SPD_JITTER);
    }

    #[test]
    fn inverse_and_log_det() {
        let m = Matrix6::from_diagonal(&Vector6::new(1.0, 2.0, 4.0, 0.5, 0.25, 8.0));
        let inv = spd_inverse(&m).unwrap();
        assert!((inv * m - Matrix6::identity()).amax() < 1e-14);
        let (_, chol) = checked_spd(&m).unwrap();
        assert!((log_det(&chol) - 2f64.ln() * 3.0).abs() < 1e-14);
    }
}
