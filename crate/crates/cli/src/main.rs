//! `mpg`: command-line front end for mixtures of projected Gaussians.
//!
//! All inputs and outputs are JSON files except pose samples, which are
//! JSON lines, and flag plots, which are SVG.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mpg_core::em::em_fit;
use mpg_core::grasp::grasp_optimize;
use mpg_core::pipeline::{demo_scenario, export_flags, io, render_svg, run_scenario, DemoConfig, View, PALETTE};
use mpg_core::{EmConfig, GraspConfig, McConfig, Mpg, ReductionReport, Scenario, Settings, ToleranceBox};

#[derive(Parser)]
#[command(name = "mpg", version, about = "Pose densities as mixtures of projected Gaussians")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Monte-Carlo samples for normalization constants.
    #[arg(long, global = true, default_value_t = mpg_core::normalize::DEFAULT_MC_SAMPLES)]
    mc_samples: usize,
}

impl Common {
    fn settings(&self) -> Settings {
        Settings::with_mc(McConfig::new(self.mc_samples, self.seed))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fuse two mixtures describing the same pose.
    Fuse {
        #[arg(long = "in", num_args = 2, required = true, value_names = ["A", "B"])]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compose two mixtures: the first `--in` is applied after the second.
    Compose {
        #[arg(long = "in", num_args = 2, required = true, value_names = ["SECOND", "FIRST"])]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw poses from a mixture as JSON lines.
    Sample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(short, long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a mixture to JSON-lines pose samples with EM.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(short, long)]
        k: usize,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long)]
        out: PathBuf,
        /// Write the log-likelihood trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Drop light components and/or merge down to a target count.
    Reduce {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        floor: Option<f64>,
        #[arg(long)]
        target: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Write the reduction report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Find the box placement with the largest probability mass.
    Grasp {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "box")]
        tolerance: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario file, or the built-in three-feature demo.
    Demo {
        /// Scenario JSON; without it the demo scenario is generated.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Demo generator settings JSON, used when no scenario is given.
        #[arg(long, conflicts_with = "scenario")]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "xy")]
        view: View,
        /// Flags drawn per plotted mixture.
        #[arg(long, default_value_t = 200)]
        flags: usize,
    },
    /// Render flag plots of one or more mixtures.
    Flags {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(short, long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        scale: f64,
        #[arg(long, default_value = "xy")]
        view: View,
        /// SVG output.
        #[arg(long)]
        out: PathBuf,
        /// Also write the flags as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn read_mpg(path: &Path) -> Result<Mpg> {
    Ok(io::read_json(path, &format!("{}", path.display()))?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    let settings = common.settings();
    match &cli.command {
        Command::Fuse { inputs, out } => {
            let (a, b) = (read_mpg(&inputs[0])?, read_mpg(&inputs[1])?);
            let (fused, skipped) = a.fuse(&b, &settings).context("fusion failed")?;
            io::write_json(out, &fused)?;
            eprintln!("{} components, {skipped} pairs skipped", fused.len());
        }
        Command::Compose { inputs, out } => {
            let (second, first) = (read_mpg(&inputs[0])?, read_mpg(&inputs[1])?);
            let composed = second.compose(&first, &settings).context("composition failed")?;
            io::write_json(out, &composed)?;
        }
        Command::Sample { input, n, out } => {
            if *n == 0 {
                bail!("invalid input in field `n`: must be at least 1");
            }
            let m = read_mpg(input)?;
            io::write_text(out, &io::motions_to_jsonl(&m.draw(*n, common.seed)))?;
        }
        Command::Fit {
            input,
            k,
            max_iters,
            out,
            trace,
        } => {
            let samples = io::read_motions(input)?;
            let cfg = EmConfig {
                max_iters: *max_iters,
                mc: McConfig::new(common.mc_samples, common.seed),
                ..EmConfig::with_components(*k, common.seed)
            };
            let (m, tr) = em_fit(&samples, &cfg).context("EM fit failed")?;
            io::write_json(out, &m)?;
            if let Some(path) = trace {
                io::write_text(path, &tr.to_csv())?;
            }
            for w in &tr.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!("{} iterations, converged: {}", tr.iterations, tr.converged);
        }
        Command::Reduce {
            input,
            floor,
            target,
            out,
            report,
        } => {
            if floor.is_none() && target.is_none() {
                bail!("invalid input in field `floor`: give --floor, --target or both");
            }
            if let Some(w) = floor {
                if !(0.0..1.0).contains(w) {
                    bail!("invalid input in field `floor`: must lie in [0, 1)");
                }
            }
            let mut m = read_mpg(input)?;
            let mut rep = ReductionReport::default();
            if let Some(w) = floor {
                let (dropped, r) = m.drop_below(*w)?;
                m = dropped;
                rep.extend(r);
            }
            if let Some(n) = target {
                if *n == 0 {
                    bail!("invalid input in field `target`: must be at least 1");
                }
                let (merged, r) = m.reduce(*n, &settings)?;
                m = merged;
                rep.extend(r);
            }
            io::write_json(out, &m)?;
            match report {
                Some(path) => io::write_json(path, &rep)?,
                None => print!("{rep}"),
            }
        }
        Command::Grasp {
            input,
            tolerance,
            samples,
            out,
        } => {
            let m = read_mpg(input)?;
            let bx: ToleranceBox = io::read_json(tolerance, &format!("{}", tolerance.display()))?;
            let cfg = GraspConfig {
                samples: *samples,
                seed: common.seed,
                ..GraspConfig::default()
            };
            let r = grasp_optimize(&m, &bx, &cfg);
            io::write_json(out, &r)?;
            eprintln!("probability {:.6} +- {:.6}", r.probability, r.stderr);
        }
        Command::Demo {
            scenario,
            config,
            out,
            view,
            flags,
        } => {
            let sc: Scenario = match (scenario, config) {
                (Some(path), _) => io::read_json(path, &format!("{}", path.display()))?,
                (None, cfg) => {
                    let mut cfg: DemoConfig = match cfg {
                        Some(path) => io::read_json(path, &format!("{}", path.display()))?,
                        None => DemoConfig::default(),
                    };
                    cfg.seed = common.seed;
                    cfg.mc_samples = common.mc_samples;
                    demo_scenario(&cfg)?
                }
            };
            io::write_json(&out.join("scenario.json"), &sc)?;
            let run = run_scenario(&sc, Some(out))?;
            let sets: Vec<_> = run
                .outputs
                .iter()
                .filter(|(name, _)| name.ends_with("_object") || Some(name) == run.outputs.last().map(|(n, _)| n))
                .enumerate()
                .map(|(i, (_, m))| export_flags(m, *flags, common.seed, 0.02, PALETTE[i % PALETTE.len()]))
                .collect();
            io::write_text(&out.join("flags.svg"), &render_svg(&sets, *view))?;
            print!("{}", mpg_core::pipeline::report_text(&run));
        }
        Command::Flags {
            inputs,
            n,
            scale,
            view,
            out,
            json,
        } => {
            if *n == 0 {
                bail!("invalid input in field `n`: must be at least 1");
            }
            let sets = inputs
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    Ok(export_flags(
                        &read_mpg(p)?,
                        *n,
                        common.seed,
                        *scale,
                        PALETTE[i % PALETTE.len()],
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            io::write_text(out, &render_svg(&sets, *view))?;
            if let Some(path) = json {
                io::write_json(path, &sets)?;
            }
        }
    }
    Ok(())
}
