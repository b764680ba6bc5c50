//! Expectation maximization for mixtures of projected Gaussians.
//!
//! Each component keeps its own chart. Samples are lifted into every chart;
//! a sample that cannot be lifted into a chart has zero density there. After
//! each M-step the updated components are recentered, which moves their
//! charts. The log-likelihood of the updated parameters on the *old* charts
//! (with the old normalization constants) is recorded separately as the
//! pre-reset value, which is the sequence EM keeps non-decreasing.

use nalgebra::{DMatrix, Vector4};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{RigidMotion, UnitQuaternion};
use crate::chart::{TangentChart, TangentCoords};
use crate::error::{MpgError, Result};
use crate::linalg::{Matrix6, Vector6};
use crate::mixture::{Component, Mpg};
use crate::normalize::{substream, McConfig};
use crate::pg::{ChartGaussian, ProjectedGaussian};

/// Components whose responsibility mass falls to this are removed.
pub const EMPTY_COMPONENT_MASS: f64 = 1e-6;

/// Added to initial cluster covariances.
pub const INIT_COVARIANCE_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Spherical k-means with k-means++ seeding.
    SphereKmeans,
    /// Spherical k-means from several uniformly drawn seedings, keeping the
    /// tightest clustering.
    RandomRestart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub n_components: usize,
    pub max_iters: usize,
    /// Convergence when the mean per-sample log-likelihood changes by less.
    pub loglik_tol: f64,
    /// Convergence when no parameter moves by more.
    pub param_tol: f64,
    pub seed: u64,
    pub init_strategy: InitStrategy,
    /// Divide component densities by their normalization constant. Turning
    /// this off uses the bare chart Gaussian of each lifted sample.
    pub include_norm_const: bool,
    pub restarts: usize,
    pub mc: McConfig,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            n_components: 1,
            max_iters: 200,
            loglik_tol: 1e-7,
            param_tol: 1e-6,
            seed: 0,
            init_strategy: InitStrategy::SphereKmeans,
            include_norm_const: true,
            restarts: 5,
            mc: McConfig::default(),
        }
    }
}

impl EmConfig {
    pub fn with_components(n_components: usize, seed: u64) -> Self {
        EmConfig {
            n_components,
            seed,
            mc: McConfig {
                seed,
                ..McConfig::default()
            },
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(MpgError::field("n_components", "must be at least 1"));
        }
        if !(self.loglik_tol > 0.0) || !(self.param_tol > 0.0) {
            return Err(MpgError::field("loglik_tol", "tolerances must be positive"));
        }
        Ok(())
    }
}

/// Record of an EM run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmTrace {
    /// Log-likelihood of the initial model and of the model after each
    /// iteration (post-reset).
    pub loglik: Vec<f64>,
    /// Log-likelihood of each M-step's parameters before recentering; `None`
    /// for iterations that removed a component.
    pub pre_reset_loglik: Vec<Option<f64>>,
    /// Responsibilities of the final model, one row per sample.
    pub responsibilities: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl EmTrace {
    /// `iter,loglik` rows, iteration 0 being the initial model.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,loglik\n");
        for (i, ll) in self.loglik.iter().enumerate() {
            out.push_str(&format!("{i},{ll}\n"));
        }
        out
    }
}

fn quat_vec(m: &RigidMotion) -> Vector4<f64> {
    m.rotation().quaternion().to_vector()
}

/// `1 - |⟨p, c⟩|`, zero for antipodal quaternions.
fn sphere_distance(p: &Vector4<f64>, c: &Vector4<f64>) -> f64 {
    1.0 - p.dot(c).abs()
}

fn nearest(p: &Vector4<f64>, centers: &[Vector4<f64>]) -> (usize, f64) {
    centers
        .iter()
        .map(|c| sphere_distance(p, c))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one center")
}

fn kmeans_pp_seed<R: Rng>(points: &[Vector4<f64>], k: usize, rng: &mut R) -> Vec<Vector4<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    while centers.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centers).1.powi(2)).collect();
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            centers.push(points[rng.random_range(0..points.len())]);
            continue;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = points.len() - 1;
        for (i, d) in d2.iter().enumerate() {
            if u < *d {
                pick = i;
                break;
            }
            u -= d;
        }
        centers.push(points[pick]);
    }
    centers
}

/// Lloyd iterations with sign-aligned centroid updates. Returns centers,
/// assignments and total distance.
fn sphere_kmeans(points: &[Vector4<f64>], mut centers: Vec<Vector4<f64>>) -> (Vec<Vector4<f64>>, Vec<usize>, f64) {
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..100 {
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
        let changed = next != assign;
        assign = next;
        for (k, c) in centers.iter_mut().enumerate() {
            let mut sum = Vector4::zeros();
            for (p, _) in points.iter().zip(&assign).filter(|(_, a)| **a == k) {
                sum += if p.dot(c) < 0.0 { -p } else { *p };
            }
            if sum.norm() > 1e-12 {
                *c = sum.normalize();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&assign)
        .map(|(p, a)| sphere_distance(p, &centers[*a]))
        .sum();
    (centers, assign, inertia)
}

/// Initial mixture: cluster rotations on the sphere, then take per-cluster
/// moments on each cluster's chart. Weights start uniform.
pub fn em_init(samples: &[RigidMotion], cfg: &EmConfig) -> Result<Mpg> {
    cfg.validate()?;
    let k = cfg.n_components;
    let required = 10 * k;
    if samples.len() < required {
        return Err(MpgError::TooFewSamples {
            samples: samples.len(),
            components: k,
            required,
        });
    }
    let points: Vec<Vector4<f64>> = samples.iter().map(quat_vec).collect();
    let mut rng = substream(cfg.seed, u64::MAX);
    let (centers, assign, _) = match cfg.init_strategy {
        InitStrategy::SphereKmeans => sphere_kmeans(&points, kmeans_pp_seed(&points, k, &mut rng)),
        InitStrategy::RandomRestart => (0..cfg.restarts.max(1))
            .map(|_| {
                let seeds = (0..k).map(|_| points[rng.random_range(0..points.len())]).collect();
                sphere_kmeans(&points, seeds)
            })
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .expect("at least one restart"),
    };
    let components = centers
        .iter()
        .enumerate()
        .map(|(c, center)| {
            let chart = TangentChart::new(UnitQuaternion::new(crate::algebra::Quaternion::from_vector(center))?);
            let lifted: Vec<TangentCoords> = samples
                .iter()
                .zip(&assign)
                .filter(|(_, a)| **a == c)
                .filter_map(|(m, _)| chart.lift(m).ok())
                .collect();
            let weights = vec![1.0; lifted.len()];
            let (mean, cov) = weighted_moments(&lifted, &weights);
            let mut mu = mean;
            mu.fixed_rows_mut::<3>(0).fill(0.0);
            let sigma = cov + Matrix6::identity() * INIT_COVARIANCE_JITTER;
            let pg = ProjectedGaussian::new(chart, mu, sigma, &cfg.mc)?;
            Ok(Component::new(1.0 / k as f64, pg))
        })
        .collect::<Result<Vec<_>>>()?;
    Mpg::normalized(components)
}

fn weighted_moments(ys: &[TangentCoords], w: &[f64]) -> (Vector6, Matrix6) {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return (Vector6::zeros(), Matrix6::zeros());
    }
    let mean = ys.iter().zip(w).map(|(y, w)| y * *w).sum::<Vector6>() / total;
    let cov = ys
        .iter()
        .zip(w)
        .map(|(y, w)| {
            let d = y - mean;
            d * d.transpose() * *w
        })
        .sum::<Matrix6>()
        / total;
    (mean, cov)
}

fn component_log_density(pg: &ProjectedGaussian, m: &RigidMotion, include_c: bool) -> f64 {
    match pg.chart().lift(m) {
        Ok(y) => {
            let ll = pg.chart_log_density(&y);
            if include_c {
                ll - pg.norm_const().ln()
            } else {
                ll
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Per-sample `ln π_i + ln p_i(x)` rows.
fn log_joint(components: &[(f64, &ProjectedGaussian)], samples: &[RigidMotion], include_c: bool) -> Vec<Vec<f64>> {
    samples
        .par_iter()
        .map(|x| {
            components
                .iter()
                .map(|(w, pg)| {
                    if *w > 0.0 {
                        w.ln() + component_log_density(pg, x, include_c)
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect()
        })
        .collect()
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn log_likelihood_of(
    components: &[(f64, &ProjectedGaussian)],
    samples: &[RigidMotion],
    include_c: bool,
) -> Result<f64> {
    let rows = log_joint(components, samples, include_c);
    let mut total = 0.0;
    for (j, row) in rows.iter().enumerate() {
        let l = log_sum_exp(row);
        if l == f64::NEG_INFINITY {
            return Err(MpgError::OrphanSample { index: j });
        }
        total += l;
    }
    Ok(total)
}

/// Total log-likelihood of `samples` under `mpg`.
pub fn log_likelihood(mpg: &Mpg, samples: &[RigidMotion], include_c: bool) -> Result<f64> {
    let comps: Vec<(f64, &ProjectedGaussian)> = mpg.components().iter().map(|c| (c.weight, &c.pg)).collect();
    log_likelihood_of(&comps, samples, include_c)
}

/// Responsibilities (rows sum to one) and the log-likelihood.
pub fn e_step(mpg: &Mpg, samples: &[RigidMotion], include_c: bool) -> Result<(DMatrix<f64>, f64)> {
    let comps: Vec<(f64, &ProjectedGaussian)> = mpg.components().iter().map(|c| (c.weight, &c.pg)).collect();
    let rows = log_joint(&comps, samples, include_c);
    let k = mpg.len();
    let mut resp = DMatrix::zeros(samples.len(), k);
    let mut total = 0.0;
    for (j, row) in rows.iter().enumerate() {
        let l = log_sum_exp(row);
        if l == f64::NEG_INFINITY {
            return Err(MpgError::OrphanSample { index: j });
        }
        total += l;
        for (i, v) in row.iter().enumerate() {
            resp[(j, i)] = (v - l).exp();
        }
    }
    Ok((resp, total))
}

/// Result of one M-step.
#[derive(Debug, Clone)]
pub struct MStep {
    /// Updated components on their previous charts, with the previous
    /// normalization constants.
    pub pre_reset: Vec<Component>,
    /// Updated components recentered and renormalized.
    pub mpg: Mpg,
    /// Indices of components removed for lack of responsibility mass.
    pub removed: Vec<usize>,
}

/// Weighted moment updates on each component's chart, followed by the chart
/// reset.
pub fn m_step(mpg: &Mpg, samples: &[RigidMotion], resp: &DMatrix<f64>, mc: &McConfig) -> Result<MStep> {
    let n = samples.len() as f64;
    let updated: Vec<Option<(Component, Component)>> = mpg
        .components()
        .par_iter()
        .enumerate()
        .map(|(i, comp)| -> Result<Option<(Component, Component)>> {
            let col = resp.column(i);
            let mass: f64 = col.iter().sum();
            if !(mass > EMPTY_COMPONENT_MASS) {
                return Ok(None);
            }
            let chart = *comp.pg.chart();
            let (ys, ws): (Vec<TangentCoords>, Vec<f64>) = samples
                .iter()
                .zip(col.iter())
                .filter(|(_, g)| **g > 0.0)
                .filter_map(|(m, g)| chart.lift(m).ok().map(|y| (y, *g)))
                .unzip();
            let (mu, sigma) = weighted_moments(&ys, &ws);
            let weight = mass / n;
            let pre = ProjectedGaussian::from_parts(chart, mu, sigma, comp.pg.normalization())?;
            let post = ChartGaussian::new(chart, mu, *pre.sigma()).recenter()?.normalize(mc)?;
            Ok(Some((Component::new(weight, pre), Component::new(weight, post))))
        })
        .collect::<Result<_>>()?;
    let removed: Vec<usize> = updated
        .iter()
        .enumerate()
        .filter(|(_, u)| u.is_none())
        .map(|(i, _)| i)
        .collect();
    let (pre_reset, post): (Vec<Component>, Vec<Component>) = updated.into_iter().flatten().unzip();
    if post.is_empty() {
        return Err(MpgError::EmptyComponent);
    }
    Ok(MStep {
        pre_reset,
        mpg: Mpg::normalized(post)?,
        removed,
    })
}

fn parameter_change(a: &Mpg, b: &Mpg) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.components()
        .iter()
        .zip(b.components())
        .map(|(x, y)| {
            let dw = (x.weight - y.weight).abs();
            let angle = x.pg.chart().angle_to(y.pg.chart());
            let dmu = (x.pg.mu() - y.pg.mu()).amax();
            let dsigma = (x.pg.sigma() - y.pg.sigma()).amax();
            dw.max(angle).max(dmu).max(dsigma)
        })
        .fold(0.0, f64::max)
}

/// Fits a mixture to pose samples.
pub fn em_fit(samples: &[RigidMotion], cfg: &EmConfig) -> Result<(Mpg, EmTrace)> {
    let mut mpg = em_init(samples, cfg)?;
    let include_c = cfg.include_norm_const;
    let (mut resp, mut ll) = e_step(&mpg, samples, include_c)?;
    let mut trace = EmTrace {
        loglik: vec![ll],
        pre_reset_loglik: Vec::new(),
        responsibilities: DMatrix::zeros(0, 0),
        iterations: 0,
        converged: false,
        warnings: Vec::new(),
    };
    let n = samples.len() as f64;
    for iter in 1..=cfg.max_iters {
        let step = m_step(&mpg, samples, &resp, &cfg.mc)?;
        if step.removed.is_empty() {
            let comps: Vec<(f64, &ProjectedGaussian)> = step.pre_reset.iter().map(|c| (c.weight, &c.pg)).collect();
            trace
                .pre_reset_loglik
                .push(Some(log_likelihood_of(&comps, samples, include_c)?));
        } else {
            trace.pre_reset_loglik.push(None);
            trace.warnings.push(format!(
                "iteration {iter}: removed empty component(s) {:?}",
                step.removed
            ));
        }
        let next = step.mpg;
        let (next_resp, next_ll) = e_step(&next, samples, include_c)?;
        trace.loglik.push(next_ll);
        trace.iterations = iter;
        let dparam = parameter_change(&mpg, &next);
        let dll = (next_ll - ll).abs() / n;
        mpg = next;
        resp = next_resp;
        ll = next_ll;
        if dll < cfg.loglik_tol || dparam < cfg.param_tol {
            trace.converged = true;
            break;
        }
    }
    trace.responsibilities = resp;
    Ok((mpg, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Quaternion;
    use nalgebra::Vector3;

    fn source(q: UnitQuaternion, t: [f64; 3], s: f64) -> ProjectedGaussian {
        let mu = Vector6::new(0.0, 0.0, 0.0, t[0], t[1], t[2]);
        ProjectedGaussian::new(
            TangentChart::new(q),
            mu,
            Matrix6::identity() * s * s,
            &McConfig::new(5000, 1),
        )
        .unwrap()
    }

    fn draw(pg: &ProjectedGaussian, n: usize, seed: u64) -> Vec<RigidMotion> {
        let mut rng = substream(seed, 0);
        (0..n).map(|_| pg.sample(&mut rng)).collect()
    }

    fn cfg(k: usize) -> EmConfig {
        EmConfig {
            mc: McConfig::new(4000, 3),
            ..EmConfig::with_components(k, 3)
        }
    }

    #[test]
    fn too_few_samples() {
        let pg = source(UnitQuaternion::IDENTITY, [0.0; 3], 0.05);
        let xs = draw(&pg, 15, 1);
        assert!(matches!(
            em_init(&xs, &cfg(2)),
            Err(MpgError::TooFewSamples { required: 20, .. })
        ));
    }

    #[test]
    fn single_component_init() {
        let q = Quaternion::new(0.3, 0.5, -0.7, 0.1).normalize().unwrap();
        let pg = source(q, [1.0, -2.0, 0.5], 0.05);
        let xs = draw(&pg, 10_000, 2);
        let m = em_init(&xs, &cfg(1)).unwrap();
        let c = &m.components()[0].pg;
        let mut sum = Vector4::zeros();
        let mut tsum = Vector3::zeros();
        for x in &xs {
            let v = quat_vec(x);
            sum += if v.dot(&q.quaternion().to_vector()) < 0.0 {
                -v
            } else {
                v
            };
            tsum += x.translation();
        }
        let mean_q = sum.normalize();
        assert!(
            (c.chart().tangent_point().quaternion().to_vector() - mean_q).amax() < 1e-9
                || (c.chart().tangent_point().quaternion().to_vector() + mean_q).amax() < 1e-9
        );
        let t = tsum / xs.len() as f64;
        assert!((c.mu().fixed_rows::<3>(3) - t).amax() < 1e-9);
        assert!(c.chart().angle_to(pg.chart()) < 2f64.to_radians());
        assert_eq!(em_init(&xs, &cfg(1)).unwrap(), m);
    }

    #[test]
    fn responsibilities_and_m_step_contracts() {
        let a = source(UnitQuaternion::IDENTITY, [0.0; 3], 0.02);
        let b = source(
            UnitQuaternion::from_axis_angle(&Vector3::x(), 0.8).unwrap(),
            [1.0, 0.0, 0.0],
            0.02,
        );
        let mpg = Mpg::new(vec![Component::new(0.5, a.clone()), Component::new(0.5, b.clone())]).unwrap();
        let mut xs = draw(&a, 200, 5);
        xs.extend(draw(&b, 200, 6));
        let (resp, _) = e_step(&mpg, &xs, true).unwrap();
        for row in resp.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        let at_mode = [a.mode(), b.mode()];
        let (r, _) = e_step(&mpg, &at_mode, true).unwrap();
        assert!(r[(0, 0)] > 0.99 && r[(1, 1)] > 0.99);
        let step = m_step(&mpg, &xs, &resp, &McConfig::new(2000, 1)).unwrap();
        assert!(step.mpg.components().iter().all(|c| c.pg.is_pg0()));
        assert!((step.mpg.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let single = Mpg::single(a.clone());
        let (r1, _) = e_step(&single, &xs[..50], true).unwrap();
        assert!(r1.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn orphan_sample_is_reported() {
        let a = source(UnitQuaternion::IDENTITY, [0.0; 3], 0.02);
        let orth = RigidMotion::from_rotation(UnitQuaternion::new(Quaternion::I).unwrap());
        let err = e_step(&Mpg::single(a), &[RigidMotion::IDENTITY, orth], true).unwrap_err();
        assert_eq!(err, MpgError::OrphanSample { index: 1 });
    }

    #[test]
    fn single_component_recovery() {
        let q = Quaternion::new(0.9, 0.1, 0.3, -0.2).normalize().unwrap();
        let src = source(q, [0.2, 0.1, -0.3], 0.05);
        let xs = draw(&src, 10_000, 8);
        let (fit, trace) = em_fit(&xs, &cfg(1)).unwrap();
        let c = &fit.components()[0].pg;
        let restated = c.params().restate(src.chart()).unwrap();
        let rel = (restated.sigma - src.sigma()).norm() / src.sigma().norm();
        assert!(rel < 0.1, "relative covariance error {rel}");
        assert!(trace.converged);
        for (t, pre) in trace.pre_reset_loglik.iter().enumerate() {
            let before = trace.loglik[t];
            if let Some(pre) = pre {
                assert!(
                    *pre >= before - 1e-9 * before.abs().max(1.0),
                    "iteration {t}: {pre} < {before}"
                );
            }
        }
    }

    #[test]
    fn two_components_on_unimodal_data_terminate() {
        let src = source(UnitQuaternion::IDENTITY, [0.0; 3], 0.05);
        let xs = draw(&src, 2000, 9);
        let c = EmConfig {
            max_iters: 50,
            ..cfg(2)
        };
        let (fit, trace) = em_fit(&xs, &c).unwrap();
        assert!(fit.len() <= 2);
        assert!(trace.iterations <= 50);
    }

    #[test]
    fn csv_export() {
        let trace = EmTrace {
            loglik: vec![-3.5, -2.25],
            pre_reset_loglik: vec![Some(-2.5)],
            responsibilities: DMatrix::zeros(0, 0),
            iterations: 1,
            converged: true,
            warnings: vec![],
        };
        assert_eq!(trace.to_csv(), "iter,loglik\n0,-3.5\n1,-2.25\n");
    }
}
