//! Monte-Carlo normalization of projected Gaussians.
//!
//! The constant is taken against the round measure on both sheets of the
//! quaternion sphere times Lebesgue measure on translations. Under central
//! projection the area element of `S^d` is `(1 + r²)^{-(d+1)/2}` in chart
//! coordinates, so `C = 2·E[(1 + r²)^{-(d+1)/2}]` for `y ~ N(μ, Σ)`.

use nalgebra::{Cholesky, SVector, U6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::Vector6;

/// Samples per RNG substream. Fixed so estimates do not depend on the number
/// of worker threads.
pub const CHUNK: usize = 2048;

pub const DEFAULT_MC_SAMPLES: usize = 10_000;

pub const MIN_MC_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: DEFAULT_MC_SAMPLES,
            seed: 0,
        }
    }
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        McConfig {
            samples: samples.max(MIN_MC_SAMPLES),
            seed,
        }
    }
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Counter-based substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Two independent standard normals by the Box-Muller transform.
pub fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // u1 in (0, 1] keeps the log finite
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

pub fn standard_normal6<R: Rng + ?Sized>(rng: &mut R) -> Vector6 {
    let (a, b) = box_muller(rng);
    let (c, d) = box_muller(rng);
    let (e, f) = box_muller(rng);
    Vector6::new(a, b, c, d, e, f)
}

/// Area element of the unit `dim`-sphere under central projection at chart
/// radius² `r2`.
pub fn projection_area_element(r2: f64, dim: u32) -> f64 {
    (1.0 + r2).powf(-0.5 * (dim as f64 + 1.0))
}

/// Mean and standard error of `f` over `n` draws, split into fixed chunks
/// evaluated in parallel and reduced in order.
fn chunked_mean<F>(n: usize, seed: u64, f: F) -> Normalization
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            let len = CHUNK.min(n - k * CHUNK);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..len {
                let v = f(&mut rng);
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partial.iter().fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    Normalization {
        value: mean,
        stderr: (var / nf).sqrt(),
        samples: n,
    }
}

/// Normalization constant of the projected Gaussian `N(μ, LLᵀ)` on a 6D chart.
pub fn mc_normalize(mu: &Vector6, chol: &Cholesky<f64, U6>, cfg: &McConfig) -> Normalization {
    let l = chol.l();
    chunked_mean(cfg.samples.max(MIN_MC_SAMPLES), cfg.seed, |rng| {
        let y = mu + l * standard_normal6(rng);
        let r2 = y.fixed_rows::<3>(0).norm_squared();
        2.0 * projection_area_element(r2, 3)
    })
}

/// Normalization of a Gaussian `N(μ, σ²)` on the tangent line of the unit
/// circle, projected centrally onto both half-circles.
pub fn circle_normalize(mu: f64, sigma: f64, cfg: &McConfig) -> Normalization {
    chunked_mean(cfg.samples.max(MIN_MC_SAMPLES), cfg.seed, |rng| {
        let u = mu + sigma * box_muller(rng).0;
        2.0 * projection_area_element(u * u, 1)
    })
}

/// Draws `N(μ, LLᵀ)` in `D` dimensions; used by tests and tools that need plain
/// chart-space Gaussians.
pub fn gaussian_draw<const D: usize, R: Rng + ?Sized>(
    mu: &SVector<f64, D>,
    l: &nalgebra::SMatrix<f64, D, D>,
    rng: &mut R,
) -> SVector<f64, D> {
    let mut z = SVector::<f64, D>::zeros();
    let mut i = 0;
    while i < D {
        let (a, b) = box_muller(rng);
        z[i] = a;
        if i + 1 < D {
            z[i + 1] = b;
        }
        i += 2;
    }
    mu + l * z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix6;

    #[test]
    fn box_muller_moments() {
        let mut rng = substream(7, 0);
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n / 2 {
            let (a, b) = box_muller(&mut rng);
            s += a + b;
            s2 += a * a + b * b;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn degenerate_limit_is_two() {
        let chol = (Matrix6::identity() * 1e-8).cholesky().unwrap();
        let c = mc_normalize(&Vector6::zeros(), &chol, &McConfig::new(100_000, 3));
        assert!((c.value - 2.0).abs() <= 3.0 * c.stderr + 1e-6);
    }

    #[test]
    fn estimate_is_reproducible() {
        let chol = (Matrix6::identity() * 0.1).cholesky().unwrap();
        let cfg = McConfig::new(10_000, 11);
        let a = mc_normalize(&Vector6::zeros(), &chol, &cfg);
        let b = mc_normalize(&Vector6::zeros(), &chol, &cfg);
        assert_eq!(a, b);
        let other = mc_normalize(&Vector6::zeros(), &chol, &McConfig::new(10_000, 12));
        assert_ne!(a.value, other.value);
    }

    #[test]
    fn independent_of_thread_count() {
        let chol = (Matrix6::identity() * 0.2).cholesky().unwrap();
        let cfg = McConfig::new(20_000, 5);
        let many = mc_normalize(&Vector6::zeros(), &chol, &cfg);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let one = pool.install(|| mc_normalize(&Vector6::zeros(), &chol, &cfg));
        assert_eq!(many, one);
    }
}
