//! Grasp criterion: probability mass of a mixture inside a placed tolerance
//! box, and a search for the placement that maximizes it.
//!
//! A box is a center pose plus half-widths in chart units (rotation) and
//! length units (translation). Membership of a motion is tested in the chart
//! at the placed box center's rotation.

mod nelder_mead;

pub use nelder_mead::{minimize, NelderMeadConfig};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::RigidMotion;
use crate::chart::{coords, rotation_part, translation_part, TangentChart, TangentCoords};
use crate::error::{MpgError, Result};
use crate::linalg::Vector6;
use crate::mixture::Mpg;
use crate::normalize::MIN_MC_SAMPLES;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxJson", into = "BoxJson")]
pub struct ToleranceBox {
    center: RigidMotion,
    half_widths: Vector6,
}

#[derive(Serialize, Deserialize)]
struct BoxJson {
    center: RigidMotion,
    half_widths: [f64; 6],
}

impl TryFrom<BoxJson> for ToleranceBox {
    type Error = MpgError;
    fn try_from(j: BoxJson) -> Result<Self> {
        ToleranceBox::new(j.center, Vector6::from(j.half_widths))
    }
}

impl From<ToleranceBox> for BoxJson {
    fn from(b: ToleranceBox) -> Self {
        BoxJson {
            center: b.center,
            half_widths: b.half_widths.into(),
        }
    }
}

impl ToleranceBox {
    pub fn new(center: RigidMotion, half_widths: Vector6) -> Result<Self> {
        if !half_widths.iter().all(|h| *h > 0.0 && h.is_finite()) {
            return Err(MpgError::field("half_widths", "all half-widths must be positive"));
        }
        Ok(ToleranceBox { center, half_widths })
    }

    pub fn center(&self) -> &RigidMotion {
        &self.center
    }

    pub fn half_widths(&self) -> &Vector6 {
        &self.half_widths
    }

    pub fn with_half_widths(&self, half_widths: Vector6) -> Result<Self> {
        Self::new(self.center, half_widths)
    }

    /// The box moved by `transform`.
    pub fn placed(&self, transform: &RigidMotion) -> PlacedBox {
        let center = transform.compose(&self.center);
        PlacedBox {
            chart: TangentChart::new(center.rotation()),
            center_t: center.translation(),
            half_widths: self.half_widths,
        }
    }
}

/// A box at a fixed placement, ready for membership tests.
#[derive(Debug, Clone, Copy)]
pub struct PlacedBox {
    chart: TangentChart,
    center_t: nalgebra::Vector3<f64>,
    half_widths: Vector6,
}

impl PlacedBox {
    /// Offset of `m` from the box center in box-chart coordinates.
    pub fn offset(&self, m: &RigidMotion) -> Option<TangentCoords> {
        let y = self.chart.lift(m).ok()?;
        Some(coords(&rotation_part(&y), &(translation_part(&y) - self.center_t)))
    }

    pub fn contains(&self, m: &RigidMotion) -> bool {
        self.offset(m)
            .is_some_and(|d| d.iter().zip(self.half_widths.iter()).all(|(v, h)| v.abs() <= *h))
    }
}

/// Fraction of `samples` inside the placed box, with its binomial standard
/// error.
pub fn fraction_inside(samples: &[RigidMotion], placed: &PlacedBox) -> (f64, f64) {
    let n = samples.len() as f64;
    let hits = samples.par_iter().filter(|m| placed.contains(m)).count() as f64;
    let p = hits / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

/// Monte-Carlo estimate of the mass of `mpg` inside `bx` moved by `transform`.
pub fn box_probability(mpg: &Mpg, bx: &ToleranceBox, transform: &RigidMotion, n: usize, seed: u64) -> (f64, f64) {
    let samples = mpg.draw(n.max(MIN_MC_SAMPLES), seed);
    fraction_inside(&samples, &bx.placed(transform))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspConfig {
    pub samples: usize,
    pub seed: u64,
    pub max_evals_per_start: usize,
}

impl Default for GraspConfig {
    fn default() -> Self {
        GraspConfig {
            samples: 20_000,
            seed: 0,
            max_evals_per_start: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraspResult {
    pub transform: RigidMotion,
    pub probability: f64,
    pub stderr: f64,
    /// Start transforms and their probabilities.
    pub starts: Vec<(RigidMotion, f64)>,
}

fn around(start: &RigidMotion, y: &[f64; 6]) -> RigidMotion {
    let chart = TangentChart::new(start.rotation());
    let t = start.translation();
    chart.project(&TangentCoords::new(
        y[0],
        y[1],
        y[2],
        t.x + y[3],
        t.y + y[4],
        t.z + y[5],
    ))
}

/// Multi-start simplex search for the placement of `bx` with the largest
/// probability mass. One sample set is drawn up front and reused for every
/// evaluation, so the objective is deterministic for a seed.
pub fn grasp_optimize(mpg: &Mpg, bx: &ToleranceBox, cfg: &GraspConfig) -> GraspResult {
    let samples = mpg.draw(cfg.samples.max(MIN_MC_SAMPLES), cfg.seed);
    let prob = |t: &RigidMotion| fraction_inside(&samples, &bx.placed(t)).0;
    let to_center = bx.center().inverse();
    let mut order: Vec<usize> = (0..mpg.len()).filter(|&i| mpg.components()[i].weight > 0.0).collect();
    order.sort_by(|&a, &b| mpg.components()[b].weight.total_cmp(&mpg.components()[a].weight));
    let starts: Vec<(RigidMotion, f64)> = order
        .iter()
        .map(|&i| {
            let t = mpg.components()[i].pg.mode().compose(&to_center);
            (t, prob(&t))
        })
        .collect();
    let hw = bx.half_widths();
    let steps: [f64; 6] = std::array::from_fn(|k| 0.5 * hw[k]);
    let nm = NelderMeadConfig {
        max_evals: cfg.max_evals_per_start,
        x_tol: 1e-3 * hw.min(),
    };
    let results: Vec<(RigidMotion, f64)> = starts
        .par_iter()
        .map(|(start, p0)| {
            let (y, f) = minimize(|y| -prob(&around(start, y)), [0.0; 6], steps, &nm);
            if -f > *p0 {
                (around(start, &y), -f)
            } else {
                (*start, *p0)
            }
        })
        .collect();
    let (transform, probability) = results
        .into_iter()
        .fold((RigidMotion::IDENTITY, f64::NEG_INFINITY), |best, r| {
            if r.1 > best.1 {
                r
            } else {
                best
            }
        });
    let n = samples.len() as f64;
    GraspResult {
        transform,
        probability,
        stderr: (probability * (1.0 - probability) / n).sqrt(),
        starts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::UnitQuaternion;
    use crate::linalg::Matrix6;
    use crate::mixture::Component;
    use crate::normalize::McConfig;
    use crate::pg::ProjectedGaussian;
    use nalgebra::Vector3;

    fn pg(q: UnitQuaternion, t: [f64; 3], sigma: [f64; 6]) -> ProjectedGaussian {
        ProjectedGaussian::new(
            TangentChart::new(q),
            Vector6::new(0.0, 0.0, 0.0, t[0], t[1], t[2]),
            Matrix6::from_diagonal(&Vector6::from(sigma.map(|s| s * s))),
            &McConfig::new(2000, 1),
        )
        .unwrap()
    }

    fn normal_cdf(x: f64) -> f64 {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    }

    // Numerical Recipes erfc with fractional error < 1.2e-7.
    fn erfc(x: f64) -> f64 {
        let z = x.abs();
        let t = 1.0 / (1.0 + 0.5 * z);
        let r = t
            * (-z * z - 1.26551223
                + t * (1.00002368
                    + t * (0.37409196
                        + t * (0.09678418
                            + t * (-0.18628806
                                + t * (0.27886807
                                    + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
                .exp();
        if x >= 0.0 {
            r
        } else {
            2.0 - r
        }
    }

    #[test]
    fn box_validation() {
        assert!(ToleranceBox::new(RigidMotion::IDENTITY, Vector6::from([0.1, 0.1, 0.0, 1.0, 1.0, 1.0])).is_err());
        let b: std::result::Result<ToleranceBox, _> =
            serde_json::from_str(r#"{"center":{"q":[1,0,0,0],"t":[0,0,0]},"half_widths":[1,1,1,1,1,-1]}"#);
        assert!(b.unwrap_err().to_string().contains("half_widths"));
    }

    #[test]
    fn whole_support_and_far_boxes() {
        let m = Mpg::single(pg(UnitQuaternion::IDENTITY, [0.5, 0.0, 0.0], [0.05; 6]));
        let big = ToleranceBox::new(m.dominant_mode(), Vector6::from([10.0, 10.0, 10.0, 1e6, 1e6, 1e6])).unwrap();
        let (p, se) = box_probability(&m, &big, &RigidMotion::IDENTITY, 10_000, 1);
        assert!((p - 1.0).abs() <= 3.0 * se + 1e-12);
        let far = ToleranceBox::new(
            RigidMotion::from_translation(Vector3::new(5.5, 0.0, 0.0)),
            Vector6::from([0.1; 6]),
        )
        .unwrap();
        assert_eq!(box_probability(&m, &far, &RigidMotion::IDENTITY, 10_000, 1).0, 0.0);
    }

    #[test]
    fn axis_aligned_box_matches_gaussian_product() {
        let sig = [0.01, 0.02, 0.015, 0.05, 0.03, 0.04];
        let q = UnitQuaternion::from_axis_angle(&Vector3::new(0.0, 0.6, 0.8), 0.7).unwrap();
        let m = Mpg::single(pg(q, [1.0, 2.0, 3.0], sig));
        let hw = [0.01, 0.03, 0.01, 0.05, 0.02, 0.06];
        let bx = ToleranceBox::new(m.dominant_mode(), Vector6::from(hw)).unwrap();
        let (p, se) = box_probability(&m, &bx, &RigidMotion::IDENTITY, 100_000, 2);
        let oracle: f64 = hw
            .iter()
            .zip(&sig)
            .map(|(h, s)| normal_cdf(h / s) - normal_cdf(-h / s))
            .product();
        assert!((p - oracle).abs() <= 3.0 * se, "{p} vs {oracle} ± {se}");
    }

    #[test]
    fn probability_monotone_in_half_widths() {
        let m = Mpg::single(pg(UnitQuaternion::IDENTITY, [0.0; 3], [0.05; 6]));
        let bx = ToleranceBox::new(RigidMotion::IDENTITY, Vector6::from([0.03; 6])).unwrap();
        let base = box_probability(&m, &bx, &RigidMotion::IDENTITY, 20_000, 3).0;
        for k in 0..6 {
            let mut hw = *bx.half_widths();
            hw[k] *= 1.5;
            let wider = bx.with_half_widths(hw).unwrap();
            assert!(box_probability(&m, &wider, &RigidMotion::IDENTITY, 20_000, 3).0 >= base);
        }
    }

    #[test]
    fn optimizer_finds_single_mode() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::x(), 0.4).unwrap();
        let comp = pg(q, [0.3, -0.2, 1.0], [0.03; 6]);
        let mode = comp.mode();
        let m = Mpg::single(comp);
        let bx = ToleranceBox::new(RigidMotion::IDENTITY, Vector6::from([0.03; 6])).unwrap();
        let r = grasp_optimize(
            &m,
            &bx,
            &GraspConfig {
                samples: 20_000,
                seed: 4,
                ..Default::default()
            },
        );
        let y = TangentChart::new(mode.rotation()).lift(&r.transform).unwrap();
        let d = coords(&rotation_part(&y), &(translation_part(&y) - mode.translation()));
        assert!(d.amax() < 0.05, "{d}");
        assert!(r.starts.iter().all(|(_, p)| r.probability >= *p));
    }

    #[test]
    fn optimizer_picks_heavier_separated_mode() {
        let a = pg(UnitQuaternion::IDENTITY, [0.0; 3], [0.02; 6]);
        let b = pg(UnitQuaternion::IDENTITY, [5.0, 0.0, 0.0], [0.02; 6]);
        let m = Mpg::new(vec![Component::new(0.4, a), Component::new(0.6, b)]).unwrap();
        let bx = ToleranceBox::new(RigidMotion::IDENTITY, Vector6::from([0.2; 6])).unwrap();
        let r = grasp_optimize(&m, &bx, &GraspConfig::default());
        assert!(
            (r.probability - 0.6).abs() < 4.0 * r.stderr.max(0.0035),
            "{}",
            r.probability
        );
        let tiny = bx.with_half_widths(Vector6::from([1e-9; 6])).unwrap();
        let r = grasp_optimize(
            &m,
            &tiny,
            &GraspConfig {
                samples: 2000,
                ..Default::default()
            },
        );
        assert!(r.probability >= 0.0 && r.transform.translation().iter().all(|v| v.is_finite()));
    }
}
