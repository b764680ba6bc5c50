//! Scenario runner for feature-based pose estimation, flag export and SVG
//! rendering.
//!
//! A scenario lists features, each with an uncertain camera-to-feature motion
//! and a known feature-to-object motion, and an ordered list of steps over
//! named mixtures. Every feature `f` registers the names
//! `f/camera_to_feature` and `f/feature_to_object`.

mod demo;
mod flags;
pub mod io;

pub use demo::{demo_scenario, DemoConfig, DemoFeature};
pub use flags::{export_flags, render_svg, Flag, FlagSet, View, PALETTE};

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::algebra::RigidMotion;
use crate::error::{MpgError, Result};
use crate::grasp::{box_probability, ToleranceBox};
use crate::mixture::{Mpg, ReductionReport};
use crate::normalize::{substream, McConfig, DEFAULT_MC_SAMPLES};
use crate::settings::Settings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub camera_to_feature: Mpg,
    pub feature_to_object: Mpg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Step {
    /// `second ∘ first`. `feature: f` is shorthand for
    /// `inputs: [f/camera_to_feature, f/feature_to_object]`.
    Compose {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        feature: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inputs: Option<[String; 2]>,
        out: String,
    },
    Fuse {
        inputs: [String; 2],
        out: String,
    },
    /// Exactly one of `floor` and `count` must be given.
    Drop {
        input: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
        out: String,
    },
    Reduce {
        input: String,
        target: usize,
        out: String,
    },
}

impl Step {
    pub fn op(&self) -> &'static str {
        match self {
            Step::Compose { .. } => "compose",
            Step::Fuse { .. } => "fuse",
            Step::Drop { .. } => "drop",
            Step::Reduce { .. } => "reduce",
        }
    }

    pub fn out(&self) -> &str {
        match self {
            Step::Compose { out, .. } | Step::Fuse { out, .. } | Step::Drop { out, .. } | Step::Reduce { out, .. } => {
                out
            }
        }
    }

    /// Names read by the step, with the JSON field each came from.
    fn inputs(&self) -> Vec<(String, &'static str)> {
        match self {
            Step::Compose {
                feature: Some(f),
                inputs: None,
                ..
            } => vec![
                (format!("{f}/camera_to_feature"), "feature"),
                (format!("{f}/feature_to_object"), "feature"),
            ],
            Step::Compose {
                inputs: Some([a, b]), ..
            }
            | Step::Fuse { inputs: [a, b], .. } => {
                vec![(a.clone(), "inputs"), (b.clone(), "inputs")]
            }
            Step::Drop { input, .. } | Step::Reduce { input, .. } => vec![(input.clone(), "input")],
            Step::Compose { .. } => vec![],
        }
    }
}

fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

fn default_eval_samples() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_max_chart_angle")]
    pub max_chart_angle_deg: f64,
    pub features: Vec<Feature>,
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Box around the true pose; when present every step output is scored
    /// by its probability mass inside it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<ToleranceBox>,
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
}

fn default_max_chart_angle() -> f64 {
    Settings::default().max_chart_angle_deg
}

impl Scenario {
    /// Checks names and step arguments; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(MpgError::field("features", "at least one feature is required"));
        }
        if !(self.max_chart_angle_deg > 0.0 && self.max_chart_angle_deg <= 90.0) {
            return Err(MpgError::field("max_chart_angle_deg", "must lie in (0, 90]"));
        }
        let mut defined = HashSet::new();
        for (i, f) in self.features.iter().enumerate() {
            if f.name.is_empty() || f.name.contains('/') {
                return Err(MpgError::field(
                    format!("features[{i}].name"),
                    "must be non-empty without '/'",
                ));
            }
            let a = defined.insert(format!("{}/camera_to_feature", f.name));
            let b = defined.insert(format!("{}/feature_to_object", f.name));
            if !(a && b) {
                return Err(MpgError::field(
                    format!("features[{i}].name"),
                    format!("duplicate name {:?}", f.name),
                ));
            }
        }
        for (i, step) in self.steps.iter().enumerate() {
            let at = |field: &str| format!("steps[{i}].{field}");
            match step {
                Step::Compose { feature, inputs, .. } if feature.is_some() == inputs.is_some() => {
                    return Err(MpgError::field(
                        at("feature"),
                        "give exactly one of `feature` and `inputs`",
                    ));
                }
                Step::Drop { floor, count, .. } => match (floor, count) {
                    (Some(w), None) if !(*w >= 0.0 && *w < 1.0) => {
                        return Err(MpgError::field(at("floor"), "must lie in [0, 1)"));
                    }
                    (Some(_), None) | (None, Some(_)) => {}
                    _ => return Err(MpgError::field(at("floor"), "give exactly one of `floor` and `count`")),
                },
                Step::Reduce { target: 0, .. } => return Err(MpgError::field(at("target"), "must be at least 1")),
                _ => {}
            }
            for (name, field) in step.inputs() {
                if !defined.contains(&name) {
                    return Err(MpgError::field(
                        at(field),
                        format!("{name:?} is not defined before this step"),
                    ));
                }
            }
            if step.out().is_empty() || step.out().contains('/') || !defined.insert(step.out().to_owned()) {
                return Err(MpgError::field(
                    at("out"),
                    format!("{:?} is empty, contains '/' or is taken", step.out()),
                ));
            }
        }
        Ok(())
    }

    fn settings_for_step(&self, step: usize) -> Settings {
        Settings {
            max_chart_angle_deg: self.max_chart_angle_deg,
            mc: McConfig::new(self.mc_samples, substream(self.seed, step as u64).next_u64()),
            ..Settings::default()
        }
    }
}

/// What one step did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub op: String,
    pub out: String,
    pub components: usize,
    /// Fusion pairs that contributed no component.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped_pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionReport>,
    /// `(probability, stderr)` inside the truth box.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth_probability: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRun {
    pub steps: Vec<StepRecord>,
    /// Step outputs in execution order.
    #[serde(skip)]
    pub outputs: Vec<(String, Mpg)>,
    /// All drops and merges of the run.
    pub reduction: ReductionReport,
    /// `(probability, stderr)` of each feature's composed estimate, keyed by
    /// output name, for compose steps that used the `feature` shorthand.
    pub truth_by_feature: BTreeMap<String, (f64, f64)>,
}

impl ScenarioRun {
    pub fn output(&self, name: &str) -> Option<&Mpg> {
        self.outputs.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn last(&self) -> Option<&Mpg> {
        self.outputs.last().map(|(_, m)| m)
    }
}

/// Runs every step in order. With `out_dir` (or the scenario's own
/// `output_dir`), writes each step output as `NN_<out>.json` plus
/// `report.json` and `report.txt`.
pub fn run_scenario(scenario: &Scenario, out_dir: Option<&Path>) -> Result<ScenarioRun> {
    scenario.validate()?;
    let out_dir = out_dir.map(Path::to_path_buf).or_else(|| scenario.output_dir.clone());
    let mut named: BTreeMap<String, Mpg> = BTreeMap::new();
    for f in &scenario.features {
        named.insert(format!("{}/camera_to_feature", f.name), f.camera_to_feature.clone());
        named.insert(format!("{}/feature_to_object", f.name), f.feature_to_object.clone());
    }
    let mut run = ScenarioRun {
        steps: Vec::new(),
        outputs: Vec::new(),
        reduction: ReductionReport::default(),
        truth_by_feature: BTreeMap::new(),
    };
    for (i, step) in scenario.steps.iter().enumerate() {
        let wrap = |e: MpgError| MpgError::Step {
            step: i,
            op: step.op().to_owned(),
            source: Box::new(e),
        };
        let settings = scenario.settings_for_step(i);
        let get = |name: &str| &named[name];
        let mut record = StepRecord {
            step: i,
            op: step.op().to_owned(),
            out: step.out().to_owned(),
            components: 0,
            skipped_pairs: None,
            reduction: None,
            truth_probability: None,
        };
        let inputs = step.inputs();
        let result = match step {
            Step::Compose { .. } => get(&inputs[0].0).compose(get(&inputs[1].0), &settings).map_err(wrap)?,
            Step::Fuse { .. } => {
                let (m, skipped) = get(&inputs[0].0).fuse(get(&inputs[1].0), &settings).map_err(wrap)?;
                record.skipped_pairs = Some(skipped);
                m
            }
            Step::Drop { floor, count, .. } => {
                let src = get(&inputs[0].0);
                let floor = match (floor, count) {
                    (Some(w), _) => *w,
                    (None, Some(k)) => src.floor_for_count(*k).ok_or_else(|| {
                        wrap(MpgError::field(
                            format!("steps[{i}].count"),
                            format!("no weight floor removes exactly {k} of {} components", src.len()),
                        ))
                    })?,
                    (None, None) => unreachable!("validated"),
                };
                let (m, report) = src.drop_below(floor).map_err(wrap)?;
                record.reduction = Some(report);
                m
            }
            Step::Reduce { target, .. } => {
                let (m, report) = get(&inputs[0].0).reduce(*target, &settings).map_err(wrap)?;
                record.reduction = Some(report);
                m
            }
        };
        record.components = result.len();
        if let Some(bx) = &scenario.truth {
            let p = box_probability(
                &result,
                bx,
                &RigidMotion::IDENTITY,
                scenario.eval_samples,
                scenario.seed,
            );
            record.truth_probability = Some(p);
            if let Step::Compose { feature: Some(_), .. } = step {
                run.truth_by_feature.insert(step.out().to_owned(), p);
            }
        }
        if let Some(r) = &record.reduction {
            run.reduction.extend(r.clone());
        }
        if let Some(dir) = &out_dir {
            io::write_json(&dir.join(format!("{i:02}_{}.json", step.out())), &result).map_err(wrap)?;
        }
        named.insert(step.out().to_owned(), result.clone());
        run.outputs.push((step.out().to_owned(), result));
        run.steps.push(record);
    }
    if let Some(dir) = &out_dir {
        io::write_json(&dir.join("report.json"), &run)?;
        io::write_text(&dir.join("report.txt"), &report_text(&run))?;
    }
    Ok(run)
}

/// Line-oriented summary of a run.
pub fn report_text(run: &ScenarioRun) -> String {
    let mut s = String::new();
    for r in &run.steps {
        s.push_str(&format!(
            "step {} {} -> {} components {}",
            r.step, r.op, r.out, r.components
        ));
        if let Some(k) = r.skipped_pairs {
            s.push_str(&format!(" skipped {k}"));
        }
        if let Some((p, se)) = r.truth_probability {
            s.push_str(&format!(" truth {p:.6} +- {se:.6}"));
        }
        s.push('\n');
        if let Some(rep) = &r.reduction {
            for line in rep.to_string().lines() {
                s.push_str("  ");
                s.push_str(line);
                s.push('\n');
            }
        }
    }
    s
}
