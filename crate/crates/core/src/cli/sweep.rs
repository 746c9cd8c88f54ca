use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flatmap::FlatState;
use crate::planner::{free_or_value, plan, PlanParams, PreviousPlan};
use crate::scenario::{PerchScenario, RunMode, SCHEMA_VERSION};
use crate::simworld::{path_visibility, run_episode};

/// Contact speed that may be left free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Speed(#[serde(with = "free_or_value")] pub Option<f64>);

impl std::fmt::Display for Speed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("free"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Closed-loop episodes.
    #[default]
    Episode,
    /// Planned paths only, with visibility taken along the plan.
    Plan,
}

/// Axes of the cross product. A missing axis keeps the base scenario value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub mode: Option<Vec<RunMode>>,
    pub incline_deg: Option<Vec<f64>>,
    pub distance: Option<Vec<f64>>,
    pub v_s3: Option<Vec<Speed>>,
    pub v_s1: Option<Vec<Speed>>,
    pub fov: Option<Vec<bool>>,
    /// `false` frees both contact speeds.
    pub boundary: Option<Vec<bool>>,
    /// Controller state noise; sets position and velocity std alike.
    pub noise_std: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub kind: SweepKind,
    /// Scenario file, relative to the sweep file. The default scenario when
    /// absent.
    #[serde(default)]
    pub base: Option<PathBuf>,
    #[serde(default = "one")]
    pub seeds: usize,
    #[serde(default)]
    pub grid: Grid,
    /// Plan sweeps: fly every cell in the duration of the base plan.
    #[serde(default = "yes")]
    pub common_duration: bool,
    /// Plan sweeps: replans around the previous path with the cone rows on.
    #[serde(default = "five")]
    pub fov_passes: usize,
    /// Plan sweeps: sample intervals of the visibility measure.
    #[serde(default = "samples")]
    pub samples: usize,
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn five() -> usize {
    5
}
fn samples() -> usize {
    2000
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).context("parsing sweep")?;
        if spec.schema_version != SCHEMA_VERSION {
            bail!(
                "sweep schema_version {} not supported (expected {SCHEMA_VERSION})",
                spec.schema_version
            );
        }
        Ok(spec)
    }

    /// Parses a sweep file and loads its base scenario.
    pub fn load(path: &Path) -> Result<(Self, PerchScenario)> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => anyhow::anyhow!("file not found: {}", path.display()),
            _ => anyhow::Error::new(e).context(format!("reading {}", path.display())),
        })?;
        let spec = Self::from_toml_str(&text)?;
        let base = match &spec.base {
            Some(rel) => {
                let p = path.parent().unwrap_or(Path::new(".")).join(rel);
                PerchScenario::load(&p).with_context(|| format!("loading base scenario {}", p.display()))?
            }
            None => PerchScenario::default(),
        };
        Ok((spec, base))
    }
}

/// One setting of every swept axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub cell: usize,
    pub mode: RunMode,
    pub incline_deg: f64,
    pub distance: f64,
    pub v_s3: Speed,
    pub v_s1: Speed,
    pub fov: bool,
    pub boundary: bool,
    pub noise_std: Option<f64>,
}

impl Cell {
    pub fn apply(&self, base: &PerchScenario) -> PerchScenario {
        let mut s = base.clone();
        s.mode = self.mode;
        s.target.incline_deg = self.incline_deg;
        s.start.distance = self.distance;
        s.plan.v_s1 = self.v_s1.0;
        s.plan.v_s3 = self.v_s3.0;
        if !self.boundary {
            s.plan.v_s1 = None;
            s.plan.v_s3 = None;
        }
        s.plan.fov_enabled = self.fov;
        if let Some(n) = self.noise_std {
            s.noise.pos_std = n;
            s.noise.vel_std = n;
        }
        s
    }
}

fn axis<T: Clone>(name: &str, values: &Option<Vec<T>>, base: T) -> Result<Vec<T>> {
    match values {
        None => Ok(vec![base]),
        Some(v) if v.is_empty() => bail!("empty grid: axis '{name}' has no values"),
        Some(v) => Ok(v.clone()),
    }
}

/// Cross product in row-major order of the `Grid` field order.
pub fn expand(grid: &Grid, base: &PerchScenario) -> Result<Vec<Cell>> {
    let modes = axis("mode", &grid.mode, base.mode)?;
    let inclines = axis("incline_deg", &grid.incline_deg, base.target.incline_deg)?;
    let distances = axis("distance", &grid.distance, base.start.distance)?;
    let v3 = axis("v_s3", &grid.v_s3, Speed(base.plan.v_s3))?;
    let v1 = axis("v_s1", &grid.v_s1, Speed(base.plan.v_s1))?;
    let fov = axis("fov", &grid.fov, base.plan.fov_enabled)?;
    let boundary = axis("boundary", &grid.boundary, true)?;
    let noise: Vec<Option<f64>> = match &grid.noise_std {
        None => vec![None],
        Some(v) => axis("noise_std", &Some(v.clone()), 0.0)?
            .into_iter()
            .map(Some)
            .collect(),
    };
    let mut cells = Vec::new();
    for &mode in &modes {
        for &incline_deg in &inclines {
            for &distance in &distances {
                for &v_s3 in &v3 {
                    for &v_s1 in &v1 {
                        for &fov in &fov {
                            for &boundary in &boundary {
                                for &noise_std in &noise {
                                    cells.push(Cell {
                                        cell: cells.len(),
                                        mode,
                                        incline_deg,
                                        distance,
                                        v_s3,
                                        v_s1,
                                        fov,
                                        boundary,
                                        noise_std,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(cells)
}

/// Result of one (cell, seed) job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    #[serde(flatten)]
    pub cell: Cell,
    pub seed: u64,
    pub outcome: String,
    pub success: bool,
    pub temporal_visibility: Option<f64>,
    pub spatial_visibility: Option<f64>,
    pub tracking_rmse: Option<f64>,
    pub anticipation_rmse: Option<f64>,
    pub e_s2: Option<f64>,
    pub e_s3: Option<f64>,
    /// Episode end time, or the plan duration.
    pub duration: Option<f64>,
    pub stretch_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    #[serde(flatten)]
    pub cell: Cell,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub temporal_visibility: Option<f64>,
    pub spatial_visibility: Option<f64>,
    pub tracking_rmse: Option<f64>,
    /// Mean |e_s2| and |e_s3| over successful runs.
    pub abs_e_s2: Option<f64>,
    pub abs_e_s3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub name: String,
    pub sweep_kind: SweepKind,
    pub seeds: Vec<u64>,
    pub varying: Vec<String>,
    pub cells: Vec<CellSummary>,
    pub rows: Vec<RunRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn varying(grid: &Grid) -> Vec<String> {
    let mut out = Vec::new();
    let mut push = |name: &str, n: Option<usize>| {
        if n.is_some_and(|n| n > 1) {
            out.push(name.to_string());
        }
    };
    push("mode", grid.mode.as_ref().map(Vec::len));
    push("incline_deg", grid.incline_deg.as_ref().map(Vec::len));
    push("distance", grid.distance.as_ref().map(Vec::len));
    push("v_s3", grid.v_s3.as_ref().map(Vec::len));
    push("v_s1", grid.v_s1.as_ref().map(Vec::len));
    push("fov", grid.fov.as_ref().map(Vec::len));
    push("boundary", grid.boundary.as_ref().map(Vec::len));
    push("noise_std", grid.noise_std.as_ref().map(Vec::len));
    out
}

fn episode_row(cell: &Cell, base: &PerchScenario, seed: u64) -> RunRow {
    let scenario = cell.apply(base);
    match run_episode(&scenario, scenario.mode, seed) {
        Ok((_, m)) => RunRow {
            cell: cell.clone(),
            seed,
            outcome: format!("{:?}", m.outcome),
            success: m.success,
            temporal_visibility: Some(m.temporal_visibility),
            spatial_visibility: Some(m.spatial_visibility),
            tracking_rmse: Some(m.tracking_rmse),
            anticipation_rmse: m.anticipation_rmse,
            e_s2: m.e_s2,
            e_s3: m.e_s3,
            duration: Some(m.end_time),
            stretch_count: m.initial_stretch_count,
        },
        Err(e) => failed_row(cell, seed, e.to_string()),
    }
}

fn failed_row(cell: &Cell, seed: u64, why: String) -> RunRow {
    RunRow {
        cell: cell.clone(),
        seed,
        outcome: format!("error: {why}"),
        success: false,
        temporal_visibility: None,
        spatial_visibility: None,
        tracking_rmse: None,
        anticipation_rmse: None,
        e_s2: None,
        e_s3: None,
        duration: None,
        stretch_count: None,
    }
}

/// Planner parameters of a scenario with the camera geometry filled in.
pub fn scenario_plan_params(s: &PerchScenario) -> PlanParams {
    PlanParams {
        fov_ratio: s.camera.ratio(),
        camera_axis: s.camera.axis_body,
        ..s.plan.clone()
    }
}

/// Duration of the base scenario's own first plan.
pub fn reference_duration(base: &PerchScenario) -> Result<f64> {
    let (x, psi) = base.start_pose()?;
    let params = scenario_plan_params(base);
    let (traj, _) = plan(&FlatState::hover(x, psi), &base.target()?, &params, &base.vehicle, None)?;
    Ok(traj.duration())
}

/// Plans a cell from its start, optionally refining with the cone rows
/// linearized about the previous pass, and measures visibility on the path.
pub fn plan_row(cell: &Cell, base: &PerchScenario, seed: u64, duration: Option<f64>, spec: &SweepSpec) -> RunRow {
    let run = || -> crate::error::Result<RunRow> {
        let s = cell.apply(base);
        let target = s.target()?;
        let (x, psi) = s.start_pose()?;
        let start = FlatState::hover(x, psi);
        let mut params = scenario_plan_params(&s);
        if duration.is_some() {
            params.fixed_duration = duration;
        }
        let (mut traj, diag) = plan(&start, &target, &params, &s.vehicle, None)?;
        if params.fov_enabled {
            for _ in 0..spec.fov_passes {
                let prev = PreviousPlan {
                    traj: &traj,
                    t_now: 0.0,
                };
                match plan(&start, &target, &params, &s.vehicle, Some(prev)) {
                    Ok((t, _)) => traj = t,
                    Err(_) => break,
                }
            }
        }
        let (tv, sv) = path_visibility(&traj, &target, &s.camera, &s.vehicle, spec.samples)?;
        Ok(RunRow {
            cell: cell.clone(),
            seed,
            outcome: "Planned".into(),
            success: true,
            temporal_visibility: Some(tv),
            spatial_visibility: Some(sv),
            tracking_rmse: None,
            anticipation_rmse: None,
            e_s2: None,
            e_s3: None,
            duration: Some(traj.duration()),
            stretch_count: Some(diag.stretch_count),
        })
    };
    run().unwrap_or_else(|e| failed_row(cell, seed, e.to_string()))
}

/// Runs every (cell, seed) job on the current rayon pool and merges the
/// results by (cell, seed).
pub fn run_sweep(spec: &SweepSpec, base: &PerchScenario, seeds_override: Option<usize>) -> Result<AblationResult> {
    base.validate()?;
    let n_seeds = seeds_override.unwrap_or(spec.seeds);
    if n_seeds == 0 {
        bail!("need at least one seed");
    }
    let cells = expand(&spec.grid, base)?;
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| base.seed.wrapping_add(i)).collect();
    let duration = match spec.kind {
        SweepKind::Plan if spec.common_duration => Some(match base.plan.fixed_duration {
            Some(d) => d,
            None => reference_duration(base).context("planning the base scenario")?,
        }),
        _ => None,
    };
    let jobs: Vec<(&Cell, u64)> = cells.iter().flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    let mut rows: Vec<RunRow> = jobs
        .par_iter()
        .map(|&(cell, seed)| match spec.kind {
            SweepKind::Episode => episode_row(cell, base, seed),
            SweepKind::Plan => plan_row(cell, base, seed, duration, spec),
        })
        .collect();
    rows.sort_by_key(|r| (r.cell.cell, r.seed));
    let summaries = cells
        .iter()
        .map(|c| {
            let rs: Vec<&RunRow> = rows.iter().filter(|r| r.cell.cell == c.cell).collect();
            let ok: Vec<&&RunRow> = rs.iter().filter(|r| r.success).collect();
            CellSummary {
                cell: c.clone(),
                runs: rs.len(),
                successes: ok.len(),
                success_rate: ok.len() as f64 / rs.len() as f64,
                temporal_visibility: mean(rs.iter().filter_map(|r| r.temporal_visibility)),
                spatial_visibility: mean(rs.iter().filter_map(|r| r.spatial_visibility)),
                tracking_rmse: mean(rs.iter().filter_map(|r| r.tracking_rmse)),
                abs_e_s2: mean(ok.iter().filter_map(|r| r.e_s2.map(f64::abs))),
                abs_e_s3: mean(ok.iter().filter_map(|r| r.e_s3.map(f64::abs))),
            }
        })
        .collect();
    Ok(AblationResult {
        name: spec.name.clone(),
        sweep_kind: spec.kind,
        seeds,
        varying: varying(&spec.grid),
        cells: summaries,
        rows,
    })
}
