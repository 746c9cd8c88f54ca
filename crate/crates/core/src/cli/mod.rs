//! Command-line verbs: `plan`, `simulate`, `ablate` and `report`. Every verb
//! writes `summary.json` into its output directory; `report` renders it.

mod output;
mod report;
mod sweep;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::flatmap::FlatState;
use crate::planner::{plan, PlanDiagnostics};
use crate::scenario::{PerchScenario, RunMode};
use crate::simworld::{run_episode, Metrics};

pub use output::{to_csv, write_atomic, write_json};
pub use report::render;
pub use sweep::{
    expand, plan_row, reference_duration, run_sweep, scenario_plan_params, AblationResult, Cell, CellSummary, Grid,
    RunRow, Speed, SweepKind, SweepSpec,
};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Parser)]
#[command(
    name = "perchkit",
    version,
    about = "Perching trajectory planning and closed-loop simulation"
)]
pub struct Cli {
    /// Worker threads for seed and sweep fan-out.
    #[arg(long, env = "PERCHKIT_THREADS", global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan once from the scenario start and certify the result.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also certify the rate, angular-velocity and moment bounds.
        #[arg(long)]
        strict_bounds: bool,
    },
    /// Run closed-loop episodes over consecutive seeds.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        #[arg(long)]
        mode: Option<RunMode>,
        #[arg(long)]
        strict_bounds: bool,
    },
    /// Run a parameter sweep file.
    Ablate {
        /// Sweep file.
        #[arg(long, visible_alias = "sweep")]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the seed count of the sweep file.
        #[arg(long)]
        seeds: Option<usize>,
        /// Restricts the sweep to one mode.
        #[arg(long)]
        mode: Option<RunMode>,
        #[arg(long)]
        strict_bounds: bool,
    },
    /// Render the summary in an output directory as markdown.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentCoefficients {
    pub duration: f64,
    /// Ascending coefficients of x, y, z and ψ in local segment time.
    pub axes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub scenario: String,
    pub start: [f64; 3],
    pub target: [f64; 3],
    pub incline_deg: f64,
    pub duration: f64,
    pub knots: Vec<f64>,
    pub segments: Vec<SegmentCoefficients>,
    /// Planned acceleration at contact and the contact condition it must meet.
    pub endpoint_acceleration: [f64; 3],
    pub required_endpoint_acceleration: [f64; 3],
    pub endpoint_velocity: [f64; 3],
    pub certified: bool,
    pub diagnostics: PlanDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub scenario: String,
    pub mode: RunMode,
    pub seeds: Vec<u64>,
    pub success_rate: f64,
    pub runs: Vec<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Summary {
    Plan(PlanReport),
    Simulate(SimulateSummary),
    Ablate(AblationResult),
}

fn load_scenario(path: &Path, strict_bounds: bool) -> Result<PerchScenario> {
    let mut s = PerchScenario::load(path)?;
    if strict_bounds {
        s.plan.strict_bounds = true;
    }
    s.validate()?;
    Ok(s)
}

pub fn plan_scenario(s: &PerchScenario) -> Result<PlanReport> {
    let target = s.target()?;
    let (x, psi) = s.start_pose()?;
    let params = sweep::scenario_plan_params(s);
    let (traj, diagnostics) = plan(&FlatState::hover(x, psi), &target, &params, &s.vehicle, None)?;
    let end = FlatState::from_spline(&traj, traj.duration());
    let required = target.endpoint_acceleration(params.alpha, s.vehicle.gravity);
    Ok(PlanReport {
        scenario: s.name.clone(),
        start: x.into(),
        target: target.s.into(),
        incline_deg: s.target.incline_deg,
        duration: traj.duration(),
        knots: traj.knots().to_vec(),
        segments: traj
            .segments()
            .iter()
            .map(|seg| SegmentCoefficients {
                duration: seg.duration,
                axes: seg.axes.iter().map(|p| p.coeffs().to_vec()).collect(),
            })
            .collect(),
        endpoint_acceleration: end.a.into(),
        required_endpoint_acceleration: required.into(),
        endpoint_velocity: end.v.into(),
        certified: diagnostics.certificates.iter().all(|c| c.passed()),
        diagnostics,
    })
}

fn cmd_plan(scenario: &Path, out: &Path, strict_bounds: bool) -> Result<()> {
    let s = load_scenario(scenario, strict_bounds)?;
    let report = plan_scenario(&s)?;
    let summary = Summary::Plan(report);
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    print!("{}", render(&summary));
    Ok(())
}

pub fn simulate(
    s: &PerchScenario,
    mode: RunMode,
    seeds: usize,
) -> Result<Vec<(u64, crate::simworld::EpisodeLog, Metrics)>> {
    use rayon::prelude::*;
    anyhow::ensure!(seeds > 0, "need at least one seed");
    let mut runs = (0..seeds as u64)
        .into_par_iter()
        .map(|i| {
            let seed = s.seed.wrapping_add(i);
            run_episode(s, mode, seed).map(|(log, m)| (seed, log, m))
        })
        .collect::<crate::error::Result<Vec<_>>>()?;
    runs.sort_by_key(|r| r.0);
    Ok(runs)
}

fn cmd_simulate(scenario: &Path, out: &Path, seeds: usize, mode: Option<RunMode>, strict_bounds: bool) -> Result<()> {
    let s = load_scenario(scenario, strict_bounds)?;
    let mode = mode.unwrap_or(s.mode);
    let runs = simulate(&s, mode, seeds)?;
    for (seed, log, _) in &runs {
        let name = if runs.len() == 1 {
            "log.csv".to_string()
        } else {
            format!("log_seed_{seed}.csv")
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf)?;
        write_atomic(&out.join(name), &buf)?;
    }
    let metrics: Vec<Metrics> = runs.into_iter().map(|r| r.2).collect();
    if metrics.len() == 1 {
        write_json(&out.join("metrics.json"), &metrics[0])?;
    }
    write_atomic(&out.join("metrics.csv"), to_csv(&metrics)?.as_bytes())?;
    let summary = Summary::Simulate(SimulateSummary {
        scenario: s.name.clone(),
        mode,
        seeds: metrics.iter().map(|m| m.seed).collect(),
        success_rate: metrics.iter().filter(|m| m.success).count() as f64 / metrics.len() as f64,
        runs: metrics,
    });
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    print!("{}", render(&summary));
    Ok(())
}

fn cmd_ablate(
    sweep: &Path,
    out: &Path,
    seeds: Option<usize>,
    mode: Option<RunMode>,
    strict_bounds: bool,
) -> Result<()> {
    let (mut spec, mut base) = SweepSpec::load(sweep)?;
    if strict_bounds {
        base.plan.strict_bounds = true;
    }
    if let Some(m) = mode {
        spec.grid.mode = Some(vec![m]);
    }
    let result = run_sweep(&spec, &base, seeds)?;
    write_atomic(&out.join("rows.csv"), to_csv(&result.rows)?.as_bytes())?;
    write_atomic(&out.join("table.csv"), to_csv(&result.cells)?.as_bytes())?;
    let summary = Summary::Ablate(result);
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    print!("{}", render(&summary));
    Ok(())
}

fn cmd_report(out: &Path) -> Result<()> {
    let path = out.join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&path).with_context(|| format!("file not found: {}", path.display()))?;
    let summary: Summary = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let md = render(&summary);
    write_atomic(&out.join("report.md"), md.as_bytes())?;
    print!("{md}");
    Ok(())
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Plan {
            scenario,
            out,
            strict_bounds,
        } => cmd_plan(scenario, out, *strict_bounds),
        Command::Simulate {
            scenario,
            out,
            seeds,
            mode,
            strict_bounds,
        } => cmd_simulate(scenario, out, *seeds, *mode, *strict_bounds),
        Command::Ablate {
            scenario,
            out,
            seeds,
            mode,
            strict_bounds,
        } => cmd_ablate(scenario, out, *seeds, *mode, *strict_bounds),
        Command::Report { out } => cmd_report(out),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.threads {
        Some(n) => {
            anyhow::ensure!(n > 0, "PERCHKIT_THREADS must be at least 1");
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()?
                .install(|| dispatch(&cli.command))
        }
        None => dispatch(&cli.command),
    }
}
