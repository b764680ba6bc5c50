//! Mixtures of projected Gaussians.
//!
//! Weights are always stored normalized. Fusion and composition expand to all
//! component pairs; dropping and greedy merging bring the count back down.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::RigidMotion;
use crate::error::{MpgError, Result};
use crate::linalg::{spd_inverse, symmetrize, Matrix6, Vector6};
use crate::normalize::{substream, CHUNK};
use crate::pg::{common_chart, ChartGaussian, ProjectedGaussian};
use crate::settings::Settings;

/// Tolerance on the sum of mixture weights.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub pg: ProjectedGaussian,
}

impl Component {
    pub fn new(weight: f64, pg: ProjectedGaussian) -> Self {
        Component { weight, pg }
    }
}

/// A convex combination of projected Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MpgJson")]
pub struct Mpg {
    components: Vec<Component>,
}

#[derive(Deserialize)]
struct MpgJson {
    components: Vec<Component>,
}

impl TryFrom<MpgJson> for Mpg {
    type Error = MpgError;
    fn try_from(j: MpgJson) -> Result<Self> {
        Mpg::new(j.components).map_err(|e| match e {
            MpgError::InvalidWeights(reason) => MpgError::field("components[].weight", reason),
            other => other,
        })
    }
}

impl Mpg {
    /// Validates that the weights are non-negative and sum to one.
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(MpgError::InvalidWeights("mixture has no components".into()));
        }
        if let Some(c) = components.iter().find(|c| !(c.weight >= 0.0) || !c.weight.is_finite()) {
            return Err(MpgError::InvalidWeights(format!(
                "weight {} is not a finite non-negative number",
                c.weight
            )));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(MpgError::InvalidWeights(format!("weights sum to {total}, expected 1")));
        }
        Ok(Mpg { components })
    }

    /// Builds a mixture from non-negative weights of any positive total.
    pub fn normalized(components: Vec<Component>) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(MpgError::InvalidWeights(format!(
                "total weight {total} is not positive"
            )));
        }
        Mpg::new(
            components
                .into_iter()
                .map(|c| Component::new(c.weight / total, c.pg))
                .collect(),
        )
    }

    pub fn single(pg: ProjectedGaussian) -> Self {
        Mpg {
            components: vec![Component::new(1.0, pg)],
        }
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn density(&self, x: &RigidMotion) -> f64 {
        self.components.iter().map(|c| c.weight * c.pg.density(x)).sum()
    }

    /// Index of a component drawn from the categorical weight distribution.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                return i;
            }
        }
        // rounding in the cumulative sum: fall back to the last positive weight
        self.components.iter().rposition(|c| c.weight > 0.0).unwrap_or(0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RigidMotion {
        let i = self.sample_index(rng);
        self.components[i].pg.sample(rng)
    }

    /// `n` draws, reproducible for a seed regardless of thread count.
    pub fn draw(&self, n: usize, seed: u64) -> Vec<RigidMotion> {
        (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .flat_map_iter(|k| {
                let mut rng = substream(seed, k as u64);
                let len = CHUNK.min(n - k * CHUNK);
                (0..len).map(move |_| self.sample(&mut rng))
            })
            .collect()
    }

    /// The mode of the heaviest component.
    pub fn dominant_mode(&self) -> RigidMotion {
        self.components
            .iter()
            .max_by(|a, b| a.weight.total_cmp(&b.weight))
            .map(|c| c.pg.mode())
            .expect("mixture is non-empty")
    }

    /// Fusion of two mixtures describing the same pose. Returns the fused
    /// mixture and the number of pairs that contributed nothing.
    pub fn fuse(&self, other: &Mpg, settings: &Settings) -> Result<(Mpg, usize)> {
        let pairs = index_pairs(self.len(), other.len());
        let fused: Vec<Option<Component>> = pairs
            .par_iter()
            .map(|&(i, j)| -> Result<Option<Component>> {
                let (a, b) = (&self.components[i], &other.components[j]);
                if !alpha(&a.pg, &b.pg, settings) {
                    return Ok(None);
                }
                let weight = delta(&a.pg, &b.pg, settings)? * a.weight * b.weight;
                if !(weight > settings.weight_floor) {
                    return Ok(None);
                }
                Ok(Some(Component::new(weight, a.pg.fuse(&b.pg, settings)?)))
            })
            .collect::<Result<_>>()?;
        let skipped = fused.iter().filter(|c| c.is_none()).count();
        let kept: Vec<Component> = fused.into_iter().flatten().collect();
        if kept.is_empty() {
            return Err(MpgError::NoCompatiblePairs);
        }
        Ok((Mpg::normalized(kept)?, skipped))
    }

    /// Mixture of `self ∘ first` over all component pairs, `self`'s index
    /// varying slowest.
    pub fn compose(&self, first: &Mpg, settings: &Settings) -> Result<Mpg> {
        let pairs = index_pairs(self.len(), first.len());
        let composed: Vec<Component> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let (a, b) = (&self.components[i], &first.components[j]);
                Ok(Component::new(a.weight * b.weight, a.pg.compose(&b.pg, settings)?))
            })
            .collect::<Result<_>>()?;
        Mpg::normalized(composed)
    }

    /// Removes components lighter than `floor`, lightest first, renormalizing
    /// after every removal.
    pub fn drop_below(&self, floor: f64) -> Result<(Mpg, ReductionReport)> {
        let mut live: Vec<(usize, f64)> = self.components.iter().map(|c| c.weight).enumerate().collect();
        let mut report = ReductionReport::default();
        loop {
            let Some(pos) = live
                .iter()
                .enumerate()
                .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .map(|(p, _)| p)
            else {
                return Err(MpgError::AllComponentsDropped { floor });
            };
            let (index, w) = live[pos];
            if w >= floor {
                break;
            }
            live.remove(pos);
            report.dropped.push((index, w));
            report.bound += 2.0 * w;
            let rest = 1.0 - w;
            if !(rest > 0.0) {
                return Err(MpgError::AllComponentsDropped { floor });
            }
            for entry in &mut live {
                entry.1 /= rest;
            }
        }
        if report.dropped.is_empty() {
            return Ok((self.clone(), report));
        }
        let components = live
            .into_iter()
            .map(|(i, w)| Component::new(w, self.components[i].pg.clone()))
            .collect();
        Ok((Mpg::normalized(components)?, report))
    }

    /// A floor for which [`Mpg::drop_below`] removes exactly `count`
    /// components, if one exists.
    pub fn floor_for_count(&self, count: usize) -> Option<f64> {
        if count >= self.len() {
            return None;
        }
        let mut w = self.weights();
        w.sort_by(f64::total_cmp);
        if count == 0 {
            return Some(0.0);
        }
        // renormalized weight of the k-th lightest at the moment it is tested
        let mut removed = 0.0;
        let mut effective = Vec::with_capacity(count + 1);
        for &wk in w.iter().take(count + 1) {
            effective.push(wk / (1.0 - removed));
            removed += wk;
        }
        let (last_dropped, first_kept) = (effective[count - 1], effective[count]);
        (last_dropped < first_kept).then_some(0.5 * (last_dropped + first_kept))
    }

    /// Greedy pairwise merging until at most `target` components remain.
    ///
    /// Each step merges the chart-compatible pair with the smallest cost
    /// `w₁·sKL(p₁, p') + w₂·sKL(p', p₂)`, `p'` being their moment-matched merge.
    pub fn reduce(&self, target: usize, settings: &Settings) -> Result<(Mpg, ReductionReport)> {
        let target = target.max(1);
        let mut report = ReductionReport::default();
        let mut comps = self.components.clone();
        if comps.len() <= target {
            return Ok((self.clone(), report));
        }
        let cost_of = |a: &Component, b: &Component| -> Option<f64> {
            alpha(&a.pg, &b.pg, settings)
                .then(|| merge_cost(a.weight, &a.pg, b.weight, &b.pg, settings).ok())
                .flatten()
        };
        let n = comps.len();
        let mut costs: Vec<Vec<Option<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| if j > i { cost_of(&comps[i], &comps[j]) } else { None })
                    .collect()
            })
            .collect();
        while comps.len() > target {
            let mut best: Option<(usize, usize, f64)> = None;
            for (i, row) in costs.iter().enumerate() {
                for (j, c) in row.iter().enumerate().skip(i + 1) {
                    if let Some(c) = *c {
                        if best.is_none_or(|(_, _, b)| c < b) {
                            best = Some((i, j, c));
                        }
                    }
                }
            }
            let Some((i, j, cost)) = best else {
                return Err(MpgError::TargetUnreachable {
                    target,
                    remaining: comps.len(),
                });
            };
            let (w, pg) = merge_pair(comps[i].weight, &comps[i].pg, comps[j].weight, &comps[j].pg, settings)?;
            report.merged.push(((i, j), cost));
            comps[i] = Component::new(w, pg);
            comps.remove(j);
            costs.remove(j);
            for row in &mut costs {
                row.remove(j);
            }
            let fresh: Vec<Option<f64>> = (0..comps.len())
                .into_par_iter()
                .map(|k| if k == i { None } else { cost_of(&comps[i], &comps[k]) })
                .collect();
            for (k, c) in fresh.into_iter().enumerate() {
                let (lo, hi) = if k < i { (k, i) } else { (i, k) };
                if lo != hi {
                    costs[lo][hi] = c;
                }
            }
        }
        Ok((Mpg::normalized(comps)?, report))
    }
}

fn index_pairs(n: usize, l: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (0..l).map(move |j| (i, j))).collect()
}

/// Whether two components may share a tangent chart.
pub fn alpha(a: &ProjectedGaussian, b: &ProjectedGaussian, settings: &Settings) -> bool {
    a.chart().angle_to(b.chart()) < settings.max_chart_angle()
}

/// `exp(-½·dᵀ(Σ₁+Σ₂)⁻¹d)` for the mean difference `d` on the common chart.
pub fn delta(a: &ProjectedGaussian, b: &ProjectedGaussian, settings: &Settings) -> Result<f64> {
    let chart = common_chart(a.chart(), b.chart(), settings.max_chart_angle())?;
    let ra = a.params().restate(&chart)?;
    let rb = b.params().restate(&chart)?;
    let d = ra.mu - rb.mu;
    let q = d.dot(&(spd_inverse(&(ra.sigma + rb.sigma))? * d));
    Ok((-0.5 * q).exp())
}

/// Symmetric KL divergence of two 6D Gaussians:
/// `½·tr(Σ₂⁻¹Σ₁ + Σ₁⁻¹Σ₂ + (Σ₁⁻¹+Σ₂⁻¹)ddᵀ) - 6`.
pub fn gaussian_skl(mu1: &Vector6, s1: &Matrix6, mu2: &Vector6, s2: &Matrix6) -> Result<f64> {
    let i1 = spd_inverse(s1)?;
    let i2 = spd_inverse(s2)?;
    let d = mu1 - mu2;
    let big_d = (i1 + i2) * d * d.transpose();
    Ok((0.5 * (i2 * s1 + i1 * s2 + big_d).trace() - 6.0).max(0.0))
}

/// Symmetric KL divergence of two components after restating both to their
/// common chart.
pub fn skl(a: &ProjectedGaussian, b: &ProjectedGaussian, settings: &Settings) -> Result<f64> {
    let (ra, rb) = restate_common(a.params(), b.params(), settings)?;
    gaussian_skl(&ra.mu, &ra.sigma, &rb.mu, &rb.sigma)
}

fn restate_common(a: &ChartGaussian, b: &ChartGaussian, settings: &Settings) -> Result<(ChartGaussian, ChartGaussian)> {
    if a.chart == b.chart {
        return Ok((*a, *b));
    }
    let chart = common_chart(&a.chart, &b.chart, settings.max_chart_angle())?;
    Ok((a.restate(&chart)?, b.restate(&chart)?))
}

/// The single Gaussian with the first two moments of `w₁·a + w₂·b`; both must
/// be on the same chart.
pub fn moment_match(w1: f64, a: &ChartGaussian, w2: f64, b: &ChartGaussian) -> ChartGaussian {
    let w = w1 + w2;
    let mu = (a.mu * w1 + b.mu * w2) / w;
    let (da, db) = (a.mu - mu, b.mu - mu);
    let sigma = ((a.sigma + da * da.transpose()) * w1 + (b.sigma + db * db.transpose()) * w2) / w;
    ChartGaussian::new(a.chart, mu, symmetrize(&sigma))
}

/// `w₁·sKL(p₁, p') + w₂·sKL(p', p₂)`.
pub fn merge_cost(w1: f64, a: &ProjectedGaussian, w2: f64, b: &ProjectedGaussian, settings: &Settings) -> Result<f64> {
    let (ra, rb) = restate_common(a.params(), b.params(), settings)?;
    let m = moment_match(w1, &ra, w2, &rb);
    Ok(w1 * gaussian_skl(&ra.mu, &ra.sigma, &m.mu, &m.sigma)? + w2 * gaussian_skl(&m.mu, &m.sigma, &rb.mu, &rb.sigma)?)
}

/// Replaces two weighted components by their moment-matched merge.
pub fn merge_pair(
    w1: f64,
    a: &ProjectedGaussian,
    w2: f64,
    b: &ProjectedGaussian,
    settings: &Settings,
) -> Result<(f64, ProjectedGaussian)> {
    if a == b {
        return Ok((w1 + w2, a.clone()));
    }
    let (ra, rb) = restate_common(a.params(), b.params(), settings)?;
    let merged = moment_match(w1, &ra, w2, &rb).recenter()?.normalize(&settings.mc)?;
    Ok((w1 + w2, merged))
}

/// What dropping and merging removed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReductionReport {
    /// `(original index, weight at removal)`.
    pub dropped: Vec<(usize, f64)>,
    /// `((i, j), cost)` with indices into the mixture as it was at that step.
    pub merged: Vec<((usize, usize), f64)>,
    /// `2·Σ` of dropped weights; bounds the change in any box probability.
    pub bound: f64,
}

impl ReductionReport {
    pub fn extend(&mut self, other: ReductionReport) {
        self.dropped.extend(other.dropped);
        self.merged.extend(other.merged);
        self.bound += other.bound;
    }
}

impl fmt::Display for ReductionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, w) in &self.dropped {
            writeln!(f, "drop {i} weight {w:.6e}")?;
        }
        for ((i, j), c) in &self.merged {
            writeln!(f, "merge {i} {j} cost {c:.6e}")?;
        }
        writeln!(f, "bound {:.6e}", self.bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Quaternion, UnitQuaternion};
    use crate::chart::TangentChart;
    use crate::normalize::McConfig;
    use nalgebra::Vector3;

    fn settings() -> Settings {
        Settings::with_mc(McConfig::new(2000, 9))
    }

    fn pg_at(q: UnitQuaternion, t: [f64; 3], s: f64) -> ProjectedGaussian {
        let mu = Vector6::new(0.0, 0.0, 0.0, t[0], t[1], t[2]);
        ProjectedGaussian::new(TangentChart::new(q), mu, Matrix6::identity() * s, &settings().mc).unwrap()
    }

    fn rot(axis: Vector3<f64>, deg: f64) -> UnitQuaternion {
        UnitQuaternion::from_axis_angle(&axis.normalize(), deg.to_radians()).unwrap()
    }

    #[test]
    fn weights_validated() {
        let p = pg_at(UnitQuaternion::IDENTITY, [0.0; 3], 0.01);
        assert!(Mpg::new(vec![Component::new(0.5, p.clone())]).is_err());
        assert!(Mpg::new(vec![]).is_err());
        assert!(Mpg::new(vec![Component::new(1.5, p.clone()), Component::new(-0.5, p)]).is_err());
    }

    #[test]
    fn density_examples() {
        let p = pg_at(UnitQuaternion::IDENTITY, [0.0; 3], 0.01);
        let q = pg_at(rot(Vector3::x(), 10.0), [0.1, 0.0, 0.0], 0.02);
        let x = RigidMotion::new(rot(Vector3::y(), 3.0), Vector3::new(0.05, 0.0, 0.0));
        assert_eq!(Mpg::single(p.clone()).density(&x), p.density(&x));
        let twin = Mpg::new(vec![Component::new(0.5, p.clone()), Component::new(0.5, p.clone())]).unwrap();
        assert!((twin.density(&x) - p.density(&x)).abs() <= 1e-14 * p.density(&x));
        let m = Mpg::new(vec![Component::new(0.25, p.clone()), Component::new(0.75, q.clone())]).unwrap();
        let oracle = 0.25 * p.density(&x) + 0.75 * q.density(&x);
        assert!((m.density(&x) - oracle).abs() <= 1e-14 * oracle);
    }

    #[test]
    fn categorical_sampling() {
        let p = pg_at(UnitQuaternion::IDENTITY, [0.0; 3], 0.01);
        let q = pg_at(rot(Vector3::x(), 10.0), [0.0; 3], 0.01);
        let m = Mpg::new(vec![Component::new(1.0, p.clone()), Component::new(0.0, q.clone())]).unwrap();
        let mut rng = substream(1, 0);
        assert!((0..1000).all(|_| m.sample_index(&mut rng) == 0));
        let m = Mpg::new(vec![Component::new(0.3, p), Component::new(0.7, q)]).unwrap();
        let n = 100_000;
        let hits = (0..n).filter(|_| m.sample_index(&mut rng) == 0).count() as f64 / n as f64;
        assert!((hits - 0.3).abs() < 4.0 * (0.3 * 0.7 / n as f64).sqrt());
        let a: Vec<_> = {
            let mut r = substream(5, 0);
            (0..10).map(|_| m.sample(&mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = substream(5, 0);
            (0..10).map(|_| m.sample(&mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn alpha_threshold() {
        let s = settings();
        let p = pg_at(UnitQuaternion::IDENTITY, [0.0; 3], 0.01);
        assert!(alpha(&p, &p, &s));
        let orth = pg_at(UnitQuaternion::new(Quaternion::I).unwrap(), [0.0; 3], 0.01);
        assert!(!alpha(&p, &orth, &s));
        // chart angle is half the rotation angle
        let near = pg_at(rot(Vector3::z(), 2.0 * 14.9), [0.0; 3], 0.01);
        let far = pg_at(rot(Vector3::z(), 2.0 * 15.1), [0.0; 3], 0.01);
        assert!(alpha(&p, &near, &s));
        assert!(!alpha(&p, &far, &s));
    }

    #[test]
    fn delta_examples() {
        let s = settings();
        let p = pg_at(UnitQuaternion::IDENTITY, [0.0; 3], 0.5);
        assert_eq!(delta(&p, &p, &s).unwrap(), 1.0);
        // Σ₁ + Σ₂ = I, so a mean offset of √(2 ln 2) along x gives δ = ½
        let q = pg_at(UnitQuaternion::IDENTITY, [(2.0 * 2f64.ln()).sqrt(), 0.0, 0.0], 0.5);
        assert!((delta(&p, &q, &s).unwrap() - 0.5).abs() < 1e-12);
        let r = pg_at(rot(Vector3::new(1.0, 2.0, 0.5), 12.0), [0.3, -0.1, 0.2], 0.2);
        assert!((delta(&p, &r, &s).unwrap() - delta(&r, &p, &s).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn fusion_pairs() {
        let s = settings();
        let p = pg_at(UnitQuaternion::IDENTITY, [0.0; 3], 0.01);
        let (f, skipped) = Mpg::single(p.clone()).fuse(&Mpg::single(p.clone()), &s).unwrap();
        assert_eq!((f.len(), skipped), (1, 0));
        assert_eq!(f.components()[0].weight, 1.0);
        let orth = pg_at(UnitQuaternion::new(Quaternion::J).unwrap(), [0.0; 3], 0.01);
        let m1 = Mpg::new(vec![Component::new(0.5, p.clone()), Component::new(0.5, orth.clone())]).unwrap();
        let (f, skipped) = m1.fuse(&Mpg::single(p.clone()), &s).unwrap();
        assert_eq!((f.len(), skipped), (1, 1));
        assert_eq!(f.components()[0].weight, 1.0);
        assert!(matches!(
            Mpg::single(orth).fuse(&Mpg::single(p), &s),
            Err(MpgError::NoCompatiblePairs)
        ));
    }

    #[test]
    fn composition_counts_and_weights() {
        let s = settings();
        let mk = |k: usize| {
            Mpg::normalized(
                (0..k)
                    .map(|i| {
                        Component::new(
                            1.0 + i as f64,
                            pg_at(rot(Vector3::z(), 5.0 * i as f64), [i as f64, 0.0, 0.0], 0.01),
                        )
                    })
                    .collect(),
            )
            .unwrap()
        };
        assert_eq!(mk(1).compose(&mk(1), &s).unwrap().len(), 1);
        let c = mk(7).compose(&mk(7), &s).unwrap();
        assert_eq!(c.len(), 49);
        assert!((c.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn drop_examples() {
        let p = pg_at(UnitQuaternion::IDENTITY, [0.0; 3], 0.01);
        let m = Mpg::new(vec![
            Component::new(0.6, p.clone()),
            Component::new(0.3, p.clone()),
            Component::new(0.1, p.clone()),
        ])
        .unwrap();
        let (same, r) = m.drop_below(0.0).unwrap();
        assert_eq!(same, m);
        assert_eq!(r.bound, 0.0);
        let (d, r) = m.drop_below(0.15).unwrap();
        let w = d.weights();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15 && (w[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.bound - 0.2).abs() < 1e-15);
        assert_eq!(r.dropped, vec![(2, 0.1)]);
        assert!(matches!(m.drop_below(2.0), Err(MpgError::AllComponentsDropped { .. })));
        let f = m.floor_for_count(1).unwrap();
        assert_eq!(m.drop_below(f).unwrap().0.len(), 2);
        let f = m.floor_for_count(2).unwrap();
        assert_eq!(m.drop_below(f).unwrap().0.len(), 1);
    }

    #[test]
    fn skl_examples() {
        let mu = Vector6::zeros();
        assert_eq!(
            gaussian_skl(&mu, &Matrix6::identity(), &mu, &Matrix6::identity()).unwrap(),
            0.0
        );
        let v = gaussian_skl(&mu, &(Matrix6::identity() * 2.0), &mu, &Matrix6::identity()).unwrap();
        assert!((v - 1.5).abs() < 1e-14);
    }

    #[test]
    fn merge_examples() {
        let s = settings();
        let p = pg_at(rot(Vector3::y(), 20.0), [1.0, 2.0, 3.0], 0.01);
        let (w, m) = merge_pair(0.2, &p, 0.3, &p, &s).unwrap();
        assert_eq!(w, 0.5);
        assert_eq!(m, p);
        let chart = TangentChart::identity();
        let e4 = Vector6::new(0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let a = ChartGaussian::new(chart, e4, Matrix6::identity());
        let b = ChartGaussian::new(chart, -e4, Matrix6::identity());
        let m = moment_match(0.5, &a, 0.5, &b);
        assert_eq!(m.mu, Vector6::zeros());
        assert_eq!(m.sigma, Matrix6::identity() + e4 * e4.transpose());
    }

    #[test]
    fn reduce_respects_target() {
        let s = settings();
        let comps: Vec<Component> = (0..6)
            .map(|i| {
                Component::new(
                    1.0,
                    pg_at(rot(Vector3::x(), 2.0 * i as f64), [0.01 * i as f64, 0.0, 0.0], 0.01),
                )
            })
            .collect();
        let m = Mpg::normalized(comps).unwrap();
        let (same, r) = m.reduce(6, &s).unwrap();
        assert_eq!((same.len(), r.merged.len()), (6, 0));
        let (red, r) = m.reduce(2, &s).unwrap();
        assert_eq!(red.len(), 2);
        assert_eq!(r.merged.len(), 4);
        assert!((red.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let apart = Mpg::new(vec![
            Component::new(0.5, pg_at(UnitQuaternion::IDENTITY, [0.0; 3], 0.01)),
            Component::new(0.5, pg_at(UnitQuaternion::new(Quaternion::I).unwrap(), [0.0; 3], 0.01)),
        ])
        .unwrap();
        assert!(matches!(apart.reduce(1, &s), Err(MpgError::TargetUnreachable { .. })));
    }

    #[test]
    fn reduced_density_tracks_original() {
        let s = settings();
        let comps: Vec<Component> = (0..8)
            .map(|i| {
                let pg = pg_at(
                    rot(Vector3::new(1.0, 2.0, 0.5), 0.1 * i as f64),
                    [0.001 * i as f64, 0.0, 0.0],
                    1e-3,
                );
                Component::new(1.0 + 0.1 * i as f64, pg)
            })
            .collect();
        for a in &comps {
            for b in &comps {
                assert!(skl(&a.pg, &b.pg, &s).unwrap() < 0.5);
            }
        }
        let m = Mpg::normalized(comps).unwrap();
        let (red, _) = m.reduce(3, &s).unwrap();
        for x in m.draw(100, 4) {
            let (p, q) = (m.density(&x), red.density(&x));
            assert!((q / p - 1.0).abs() < 0.15, "{p} vs {q}");
        }
    }

    #[test]
    fn json_rejects_bad_weights() {
        let p = pg_at(UnitQuaternion::IDENTITY, [0.0; 3], 0.01);
        let mut v = serde_json::to_value(Mpg::single(p)).unwrap();
        v["components"][0]["weight"] = serde_json::json!(0.4);
        let err = serde_json::from_value::<Mpg>(v).unwrap_err().to_string();
        assert!(err.contains("components[].weight"), "{err}");
    }
}
