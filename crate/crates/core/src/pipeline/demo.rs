//! Generative stand-in for stereo feature measurements of a known object.
//!
//! Each feature sees the object along its own sight line. Its
//! camera-to-feature estimate has one component at the true orientation and
//! the rest fanned on a cone around it, tilted about axes perpendicular to
//! the sight line, with translation uncertainty stretched along the sight
//! line. The fans of different features are rotated against each other, so
//! only the central components agree.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Feature, Scenario, Step};
use crate::algebra::{RigidMotion, UnitQuaternion};
use crate::chart::TangentChart;
use crate::error::{MpgError, Result};
use crate::grasp::ToleranceBox;
use crate::linalg::{Matrix6, Vector6};
use crate::mixture::{Component, Mpg};
use crate::normalize::{substream, McConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoFeature {
    pub name: String,
    /// Feature frame in object coordinates.
    pub feature_to_object: RigidMotion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoConfig {
    pub seed: u64,
    pub mc_samples: usize,
    pub eval_samples: usize,
    /// True camera-to-object motion.
    pub truth: RigidMotion,
    pub features: Vec<DemoFeature>,
    /// Components per camera-to-feature mixture.
    pub components: usize,
    /// Full aperture of the orientation cone, degrees.
    pub cone_deg: f64,
    /// Weight of the central component.
    pub center_weight: f64,
    /// Rotation standard deviation, chart units.
    pub rot_sigma: f64,
    pub depth_sigma: f64,
    pub lateral_sigma: f64,
    /// Standard deviation of the known feature-to-object motions.
    pub model_sigma: f64,
    /// Half-widths of the truth box.
    pub truth_half_widths: [f64; 6],
    pub drop_count: usize,
    pub reduce_target: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        let feature = |name: &str, axis: [f64; 3], angle: f64, t: [f64; 3]| DemoFeature {
            name: name.into(),
            feature_to_object: RigidMotion::new(
                UnitQuaternion::from_rotation_vector(&(Vector3::from(axis).normalize() * angle)),
                Vector3::from(t),
            ),
        };
        DemoConfig {
            seed: 1,
            mc_samples: 10_000,
            eval_samples: 20_000,
            truth: RigidMotion::new(
                UnitQuaternion::from_rotation_vector(&Vector3::new(0.25, -0.4, 0.3)),
                Vector3::new(0.05, -0.03, 0.8),
            ),
            features: vec![
                feature("B", [0.0, 0.0, 1.0], 0.3, [0.08, 0.03, 0.0]),
                feature("l", [1.0, 0.0, 0.0], -0.2, [-0.06, 0.07, 0.02]),
                feature("mountain", [0.0, 1.0, 0.0], 0.4, [0.0, -0.08, -0.03]),
            ],
            components: 7,
            cone_deg: 15.0,
            center_weight: 0.3,
            rot_sigma: 0.02,
            depth_sigma: 0.02,
            lateral_sigma: 0.004,
            model_sigma: 1e-4,
            truth_half_widths: [0.01, 0.01, 0.01, 0.01, 0.01, 0.01],
            drop_count: 10,
            reduce_target: 10,
        }
    }
}

fn pg(q: UnitQuaternion, t: Vector3<f64>, sigma: Matrix6, mc: &McConfig) -> Result<crate::pg::ProjectedGaussian> {
    let mu = Vector6::new(0.0, 0.0, 0.0, t.x, t.y, t.z);
    crate::pg::ProjectedGaussian::new(TangentChart::new(q), mu, sigma, mc)
}

/// Any two unit vectors perpendicular to `s` and to each other.
fn perpendicular_pair(s: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if s.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = s.cross(&helper).normalize();
    (e1, s.cross(&e1))
}

/// Builds the three-feature scenario: compose every feature, fuse the first
/// two, drop, reduce, then fuse in the remaining features one by one.
pub fn demo_scenario(cfg: &DemoConfig) -> Result<Scenario> {
    if cfg.features.len() < 2 {
        return Err(MpgError::field("features", "the demo needs at least two features"));
    }
    if cfg.components < 2 {
        return Err(MpgError::field("components", "must be at least 2"));
    }
    if !(cfg.center_weight > 0.0 && cfg.center_weight < 1.0) {
        return Err(MpgError::field("center_weight", "must lie in (0, 1)"));
    }
    let mut rng = substream(cfg.seed, u64::MAX);
    let mc = McConfig::new(cfg.mc_samples, cfg.seed);
    let half_cone = 0.5 * cfg.cone_deg.to_radians();
    let fan = cfg.components - 1;
    let mut features = Vec::with_capacity(cfg.features.len());
    for (k, f) in cfg.features.iter().enumerate() {
        let cam_to_feat = cfg.truth.compose(&f.feature_to_object.inverse());
        let t = cam_to_feat.translation();
        let sight = t.normalize();
        let (e1, e2) = perpendicular_pair(&sight);
        let proj = sight * sight.transpose();
        let t_cov = proj * cfg.depth_sigma.powi(2) + (Matrix3::identity() - proj) * cfg.lateral_sigma.powi(2);
        let mut sigma = Matrix6::zeros();
        sigma.fixed_view_mut::<3, 3>(0, 0).fill_diagonal(cfg.rot_sigma.powi(2));
        sigma.fixed_view_mut::<3, 3>(3, 3).copy_from(&t_cov);

        let raw: Vec<f64> = (0..fan).map(|_| rng.random_range(0.5..1.5)).collect();
        let total: f64 = raw.iter().sum();
        let mut comps = vec![Component::new(
            cfg.center_weight,
            pg(cam_to_feat.rotation(), t, sigma, &mc)?,
        )];
        let stagger = std::f64::consts::TAU / fan as f64 / cfg.features.len() as f64;
        for (j, w) in raw.iter().enumerate() {
            let azimuth =
                std::f64::consts::TAU * j as f64 / fan as f64 + stagger * k as f64 + rng.random_range(-0.1..0.1);
            let tilt = half_cone * rng.random_range(0.6..1.0);
            let axis = e1 * azimuth.cos() + e2 * azimuth.sin();
            let q = UnitQuaternion::from_rotation_vector(&(axis * tilt)) * cam_to_feat.rotation();
            comps.push(Component::new(
                (1.0 - cfg.center_weight) * w / total,
                pg(q, t, sigma, &mc)?,
            ));
        }
        let model = Matrix6::identity() * cfg.model_sigma.powi(2);
        let fo = f.feature_to_object;
        features.push(Feature {
            name: f.name.clone(),
            camera_to_feature: Mpg::normalized(comps)?,
            feature_to_object: Mpg::single(pg(fo.rotation(), fo.translation(), model, &mc)?),
        });
    }

    let object = |f: &DemoFeature| format!("{}_object", f.name);
    let mut steps: Vec<Step> = cfg
        .features
        .iter()
        .map(|f| Step::Compose {
            feature: Some(f.name.clone()),
            inputs: None,
            out: object(f),
        })
        .collect();
    steps.push(Step::Fuse {
        inputs: [object(&cfg.features[0]), object(&cfg.features[1])],
        out: "fused".into(),
    });
    steps.push(Step::Drop {
        input: "fused".into(),
        floor: None,
        count: Some(cfg.drop_count),
        out: "dropped".into(),
    });
    steps.push(Step::Reduce {
        input: "dropped".into(),
        target: cfg.reduce_target,
        out: "reduced".into(),
    });
    let mut last = "reduced".to_owned();
    for (k, f) in cfg.features.iter().enumerate().skip(2) {
        let out = if k + 1 == cfg.features.len() {
            "final".to_owned()
        } else {
            format!("fused_{k}")
        };
        steps.push(Step::Fuse {
            inputs: [last, object(f)],
            out: out.clone(),
        });
        last = out;
    }
    Ok(Scenario {
        seed: cfg.seed,
        mc_samples: cfg.mc_samples,
        max_chart_angle_deg: super::default_max_chart_angle(),
        features,
        steps,
        output_dir: None,
        truth: Some(ToleranceBox::new(cfg.truth, Vector6::from(cfg.truth_half_widths))?),
        eval_samples: cfg.eval_samples,
    })
}
