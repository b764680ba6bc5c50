//! Projected Gaussians: a Gaussian on a tangent chart pushed to rigid motions
//! by central projection and renormalized.

use nalgebra::{Cholesky, SMatrix, U6};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{RigidMotion, UnitQuaternion};
use crate::chart::{self, CompositionMap, TangentChart, TangentCoords, FD_STEP};
use crate::error::{MpgError, Result};
use crate::linalg::{checked_spd, log_det, spd_inverse, symmetrize, Matrix6, Vector6};
use crate::normalize::{mc_normalize, standard_normal6, McConfig, Normalization};
use crate::settings::Settings;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Unnormalized Gaussian parameters on a chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartGaussian {
    pub chart: TangentChart,
    pub mu: Vector6,
    pub sigma: Matrix6,
}

impl ChartGaussian {
    pub fn new(chart: TangentChart, mu: Vector6, sigma: Matrix6) -> Self {
        ChartGaussian { chart, mu, sigma }
    }

    /// Parameters in `target`: mean through the chart transition, covariance
    /// through its Jacobian at the mean.
    pub fn restate(&self, target: &TangentChart) -> Result<ChartGaussian> {
        if *target == self.chart {
            return Ok(*self);
        }
        let mu = self.chart.transition(target, &self.mu)?;
        let jac = self.chart.transition_jacobian(target, &self.mu)?;
        Ok(ChartGaussian::new(
            *target,
            mu,
            symmetrize(&(jac * self.sigma * jac.transpose())),
        ))
    }

    /// Restates onto the chart at the rotation of the mean, zeroing the
    /// rotation part of the mean. Offsets below [`RECENTER_EPSILON`] are
    /// zeroed in place; a chart change that small is below the accuracy of
    /// the transition Jacobian.
    pub fn recenter(&self) -> Result<ChartGaussian> {
        if chart::rotation_part(&self.mu).norm() <= RECENTER_EPSILON {
            let mut out = *self;
            out.mu.fixed_rows_mut::<3>(0).fill(0.0);
            return Ok(out);
        }
        let center = self.chart.project(&self.mu).rotation();
        let mut out = self.restate(&TangentChart::new(center))?;
        out.mu.fixed_rows_mut::<3>(0).fill(0.0);
        Ok(out)
    }

    pub fn normalize(self, mc: &McConfig) -> Result<ProjectedGaussian> {
        ProjectedGaussian::new(self.chart, self.mu, self.sigma, mc)
    }
}

/// Rotation offsets (chart units) treated as already centered.
pub const RECENTER_EPSILON: f64 = 1e-12;

/// The chart at the normalized sum of the two tangent points, after folding
/// the second onto the first's hemisphere.
pub fn common_chart(a: &TangentChart, b: &TangentChart, max_angle: f64) -> Result<TangentChart> {
    let angle = a.angle_to(b);
    if angle >= max_angle {
        return Err(MpgError::ChartsTooFarApart {
            angle_deg: angle.to_degrees(),
            limit_deg: max_angle.to_degrees(),
        });
    }
    if a == b {
        return Ok(*a);
    }
    let (qa, qb) = (a.tangent_point(), b.tangent_point());
    let s = if qa.dot(qb) < 0.0 { -1.0 } else { 1.0 };
    let sum = qa.quaternion() + qb.quaternion().scale(s);
    Ok(TangentChart::new(UnitQuaternion::new(sum)?))
}

/// A projected Gaussian with cached Cholesky factor and normalization constant.
#[derive(Debug, Clone)]
pub struct ProjectedGaussian {
    params: ChartGaussian,
    chol: Cholesky<f64, U6>,
    log_det: f64,
    norm: Normalization,
}

impl PartialEq for ProjectedGaussian {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.norm == other.norm
    }
}

impl ProjectedGaussian {
    /// Validates `sigma` and estimates the normalization constant.
    pub fn new(chart: TangentChart, mu: Vector6, sigma: Matrix6, mc: &McConfig) -> Result<Self> {
        if !mu.iter().all(|v| v.is_finite()) {
            return Err(MpgError::field("mu", "mean must be finite"));
        }
        let (sigma, chol) = checked_spd(&sigma)?;
        let norm = mc_normalize(&mu, &chol, mc);
        Ok(Self::assemble(ChartGaussian::new(chart, mu, sigma), chol, norm))
    }

    /// Rebuilds a component from stored parameters, trusting `norm`.
    pub fn from_parts(chart: TangentChart, mu: Vector6, sigma: Matrix6, norm: Normalization) -> Result<Self> {
        if !mu.iter().all(|v| v.is_finite()) {
            return Err(MpgError::field("mu", "mean must be finite"));
        }
        if !(norm.value > 0.0) || !norm.value.is_finite() {
            return Err(MpgError::field("C", "normalization constant must be positive"));
        }
        let (sigma, chol) = checked_spd(&sigma)?;
        Ok(Self::assemble(ChartGaussian::new(chart, mu, sigma), chol, norm))
    }

    fn assemble(params: ChartGaussian, chol: Cholesky<f64, U6>, norm: Normalization) -> Self {
        let log_det = log_det(&chol);
        ProjectedGaussian {
            params,
            chol,
            log_det,
            norm,
        }
    }

    pub fn chart(&self) -> &TangentChart {
        &self.params.chart
    }

    pub fn mu(&self) -> &Vector6 {
        &self.params.mu
    }

    pub fn sigma(&self) -> &Matrix6 {
        &self.params.sigma
    }

    pub fn params(&self) -> &ChartGaussian {
        &self.params
    }

    pub fn normalization(&self) -> Normalization {
        self.norm
    }

    pub fn norm_const(&self) -> f64 {
        self.norm.value
    }

    pub fn cholesky(&self) -> &Cholesky<f64, U6> {
        &self.chol
    }

    /// Whether the rotation part of the mean is zero.
    pub fn is_pg0(&self) -> bool {
        chart::rotation_part(&self.params.mu).iter().all(|v| *v == 0.0)
    }

    /// The rigid motion at the chart mean.
    pub fn mode(&self) -> RigidMotion {
        self.params.chart.project(&self.params.mu)
    }

    /// Log of the chart Gaussian density at `y` (no normalization constant).
    pub fn chart_log_density(&self, y: &TangentCoords) -> f64 {
        let d = y - self.params.mu;
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&d)
            .expect("non-singular factor");
        -0.5 * (6.0 * LN_2PI + self.log_det + z.norm_squared())
    }

    /// Log density on rigid motions, `None` where `m` cannot be lifted.
    pub fn log_density(&self, m: &RigidMotion) -> Option<f64> {
        let y = self.params.chart.lift(m).ok()?;
        Some(self.chart_log_density(&y) - self.norm.value.ln())
    }

    /// Density on rigid motions; zero for rotations (near) orthogonal to the
    /// tangent point.
    pub fn density(&self, m: &RigidMotion) -> f64 {
        self.log_density(m).map_or(0.0, f64::exp)
    }

    /// Draws chart coordinates `μ + L·z` with Box-Muller normals `z`.
    pub fn sample_coords<R: Rng + ?Sized>(&self, rng: &mut R) -> TangentCoords {
        self.params.mu + self.chol.l_dirty().lower_triangle() * standard_normal6(rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RigidMotion {
        self.params.chart.project(&self.sample_coords(rng))
    }

    /// Re-expresses this component on `target`, which must lie within the
    /// configured chart angle.
    pub fn restate(&self, target: &TangentChart, settings: &Settings) -> Result<ProjectedGaussian> {
        let angle = self.params.chart.angle_to(target);
        if angle >= settings.max_chart_angle() {
            return Err(MpgError::ChartsTooFarApart {
                angle_deg: angle.to_degrees(),
                limit_deg: settings.max_chart_angle_deg,
            });
        }
        self.params.restate(target)?.normalize(&settings.mc)
    }

    /// The same distribution on the chart centered at its rotational mean.
    pub fn recenter(&self, settings: &Settings) -> Result<ProjectedGaussian> {
        if self.is_pg0() {
            return Ok(self.clone());
        }
        self.params.recenter()?.normalize(&settings.mc)
    }

    /// Information fusion of two estimates of the same pose.
    pub fn fuse(&self, other: &ProjectedGaussian, settings: &Settings) -> Result<ProjectedGaussian> {
        fuse_params(&self.params, &other.params, settings.max_chart_angle())?
            .recenter()?
            .normalize(&settings.mc)
    }

    /// Density of `self ∘ first` for independent motions.
    pub fn compose(&self, first: &ProjectedGaussian, settings: &Settings) -> Result<ProjectedGaussian> {
        compose_params(&self.params, &first.params)?.normalize(&settings.mc)
    }
}

/// Fused parameters on the common chart, not yet recentered.
pub fn fuse_params(a: &ChartGaussian, b: &ChartGaussian, max_angle: f64) -> Result<ChartGaussian> {
    let chart = common_chart(&a.chart, &b.chart, max_angle)?;
    let a = a.restate(&chart)?;
    let b = b.restate(&chart)?;
    let info_a = spd_inverse(&a.sigma)?;
    let info_b = spd_inverse(&b.sigma)?;
    let sigma = spd_inverse(&(info_a + info_b))?;
    let mu = sigma * (info_a * a.mu + info_b * b.mu);
    Ok(ChartGaussian::new(chart, mu, sigma))
}

/// Composition `second ∘ first` linearized at the two means. Inputs are
/// recentered first; the result is centered at `q₂*q₁`.
pub fn compose_params(second: &ChartGaussian, first: &ChartGaussian) -> Result<ChartGaussian> {
    let second = second.recenter()?;
    let first = first.recenter()?;
    let map = CompositionMap::new(second.chart, first.chart);
    let (mut mu, jac) = map.jacobian_at(&second.mu, &first.mu, FD_STEP)?;
    let mut block = SMatrix::<f64, 12, 12>::zeros();
    block.fixed_view_mut::<6, 6>(0, 0).copy_from(&second.sigma);
    block.fixed_view_mut::<6, 6>(6, 6).copy_from(&first.sigma);
    let sigma = symmetrize(&(jac * block * jac.transpose()));
    // rotation means sit at the chart centers, so g keeps them there
    mu.fixed_rows_mut::<3>(0).fill(0.0);
    Ok(ChartGaussian::new(map.result, mu, sigma))
}

#[derive(Serialize, Deserialize)]
struct PgJson {
    q0: [f64; 4],
    mu: [f64; 6],
    sigma: Vec<f64>,
    #[serde(rename = "C")]
    c: f64,
    n_mc: usize,
    #[serde(rename = "C_stderr", default)]
    c_stderr: f64,
}

impl Serialize for ProjectedGaussian {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PgJson {
            q0: self.params.chart.tangent_point().to_array(),
            mu: self.params.mu.into(),
            // row-major
            sigma: self.params.sigma.transpose().iter().copied().collect(),
            c: self.norm.value,
            n_mc: self.norm.samples,
            c_stderr: self.norm.stderr,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProjectedGaussian {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let j = PgJson::deserialize(d)?;
        let q0 =
            UnitQuaternion::new(j.q0.into()).map_err(|e| D::Error::custom(MpgError::field("q0", e.to_string())))?;
        if j.sigma.len() != 36 {
            return Err(D::Error::custom(MpgError::field(
                "sigma",
                format!("expected 36 row-major entries, got {}", j.sigma.len()),
            )));
        }
        let sigma = Matrix6::from_row_slice(&j.sigma);
        let norm = Normalization {
            value: j.c,
            stderr: j.c_stderr,
            samples: j.n_mc,
        };
        ProjectedGaussian::from_parts(TangentChart::new(q0), Vector6::from(j.mu), sigma, norm).map_err(|e| {
            D::Error::custom(match e {
                MpgError::InvalidField { .. } => e,
                other => MpgError::field("sigma", other.to_string()),
            })
        })
    }
}
