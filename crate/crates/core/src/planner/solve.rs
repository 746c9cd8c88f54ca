use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::constraints::{
    band_times, build_boundary_constraints, build_perch_constraints, ConstraintRows, EndpointSpec,
};
use super::fov::{build_fov_constraints, SkippedPoint};
use super::layout::{SplineLayout, AXES};
use super::params::PlanParams;
use super::target::PerchTarget;
use crate::error::{Error, Result};
use crate::flatmap::{actuator_bound_poly, thrust_sq_poly, BoundKind, FlatState, VehicleParams};
use crate::polyalg::{gbc, Polynomial};
use crate::qpcore::{kkt_residuals, solve_qp, KktResiduals, QpProblem, QpStatus};
use crate::Spline64;

/// Trajectory being flown when a replan starts, with the current time on it.
#[derive(Debug, Clone, Copy)]
pub struct PreviousPlan<'a> {
    pub traj: &'a Spline64,
    pub t_now: f64,
}

/// Smallest look-ahead for which a knot of the previous plan is kept.
const KNOT_MARGIN: f64 = 0.02;
const MIN_FIRST_SEGMENT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrictCertificate {
    pub thrust_rate: bool,
    pub omega: bool,
    pub omega_dot: bool,
    pub moment: [bool; 3],
}

impl StrictCertificate {
    pub fn passed(&self) -> bool {
        self.thrust_rate && self.omega && self.omega_dot && self.moment.iter().all(|&m| m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentCertificate {
    pub segment: usize,
    pub duration: f64,
    /// `‖τ‖ < τ_max` on the whole segment.
    pub thrust_max: bool,
    /// `‖τ‖ > τ_min` on the whole segment.
    pub thrust_min: bool,
    pub strict: Option<StrictCertificate>,
}

impl SegmentCertificate {
    pub fn passed(&self) -> bool {
        self.thrust_max && self.thrust_min && self.strict.is_none_or(|s| s.passed())
    }
}

/// How the camera-cone rows enter a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FovStage {
    /// Every expansion point must see the target.
    Full,
    /// Points already outside the cone may not get worse.
    Relaxed,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    pub stretch_count: usize,
    pub solves: usize,
    pub status: QpStatus,
    pub iterations: usize,
    pub fov_dropped: bool,
    pub fov_stage: FovStage,
    /// Cone rows relaxed to non-worsening.
    pub fov_relaxed: usize,
    pub fov_rows: usize,
    pub fov_points: usize,
    pub fov_skipped: Vec<SkippedPoint>,
    pub durations: Vec<f64>,
    pub certificates: Vec<SegmentCertificate>,
    pub kkt: KktResiduals<f64>,
    /// `‖ẍ(t_f) − (α s₃ − g e₃)‖`
    pub endpoint_residual: f64,
    /// Largest violation of the pre-impact band at its sample times.
    pub band_violation: f64,
    pub continuity_defect: f64,
}

fn initial_durations(
    start: &FlatState,
    target: &PerchTarget,
    params: &PlanParams,
    prev: Option<PreviousPlan>,
) -> Result<Vec<f64>> {
    if let Some(prev) = prev {
        let end = prev.traj.duration();
        let rem = end - prev.t_now;
        if !(rem > KNOT_MARGIN) {
            return Err(Error::InvalidInput(format!(
                "previous trajectory has only {rem:.3} s left"
            )));
        }
        let knots = prev.traj.knots();
        let interior = &knots[1..knots.len() - 1];
        if let Some(&k) = interior.iter().rev().find(|&&k| k - prev.t_now > KNOT_MARGIN) {
            return Ok(vec![k - prev.t_now, end - k]);
        }
        if rem > params.t_k + KNOT_MARGIN {
            return Ok(vec![rem - params.t_k, params.t_k]);
        }
        return Ok(vec![rem]);
    }
    let guess = match params.fixed_duration {
        Some(d) => d,
        None => ((target.s - start.x).norm() / params.avg_speed).max(params.min_time) * params.time_scale,
    };
    Ok(vec![(guess - params.t_k).max(MIN_FIRST_SEGMENT), params.t_k])
}

struct Attempt {
    problem: QpProblem<f64>,
    solution: crate::qpcore::QpSolution<f64>,
    fov_rows: usize,
    fov_points: usize,
    fov_skipped: Vec<SkippedPoint>,
    fov_relaxed: usize,
    band: ConstraintRows,
}

#[allow(clippy::too_many_arguments)]
fn solve_once(
    start: &FlatState,
    target: &PerchTarget,
    end: &EndpointSpec,
    params: &PlanParams,
    vehicle: &VehicleParams,
    prev: Option<PreviousPlan>,
    layout: &SplineLayout,
    stage: FovStage,
) -> Result<Attempt> {
    let n = layout.n_vars();
    let mut weights = [1.0; AXES];
    weights[AXES - 1] = params.yaw_weight;
    let q = layout.cost(params.deriv_order, &weights)?;
    let mut eq = build_boundary_constraints(start, end, layout);
    let (contact, band) = build_perch_constraints(target, params, vehicle.gravity, layout);
    eq.extend(contact);
    let mut ineq = band.clone();
    let (mut fov_rows, mut fov_points, mut fov_skipped, mut fov_relaxed) = (0, 0, Vec::new(), 0);
    if stage != FovStage::Off {
        if let Some(prev) = prev {
            let mut fov = build_fov_constraints(prev.traj, prev.t_now, target, params, vehicle, layout);
            if stage == FovStage::Relaxed {
                fov_relaxed = fov.relax_violating();
            }
            fov_rows = fov.rows.len();
            fov_points = fov.points.len();
            fov_skipped = fov.skipped;
            ineq.extend(fov.rows);
        }
    }
    let problem = QpProblem::new(q)
        .with_equalities(eq.matrix(n), eq.lower_vec())
        .with_inequalities(ineq.matrix(n), ineq.lower_vec(), ineq.upper_vec());
    let solution = solve_qp(&problem)?;
    Ok(Attempt {
        problem,
        solution,
        fov_rows,
        fov_points,
        fov_skipped,
        fov_relaxed,
        band,
    })
}

fn check(h: &Polynomial<f64>, bound: f64, duration: f64) -> Result<bool> {
    gbc(&h.scale_argument(duration), bound, 0.0, 1.0)
}

/// Global bound checks of every segment; runs on normalized segment time.
pub fn certify(traj: &Spline64, params: &PlanParams, vehicle: &VehicleParams) -> Result<Vec<SegmentCertificate>> {
    certify_with_margin(traj, params, vehicle, 1.0)
}

/// [`certify`] against the thrust interval `[τ_min / margin, τ_max · margin]`.
pub fn certify_with_margin(
    traj: &Spline64,
    params: &PlanParams,
    vehicle: &VehicleParams,
    margin: f64,
) -> Result<Vec<SegmentCertificate>> {
    if !(margin > 0.0 && margin <= 1.0) {
        return Err(Error::InvalidInput(format!("thrust margin {margin} outside (0, 1]")));
    }
    let (tau_min, tau_max) = (vehicle.tau_min / margin, vehicle.tau_max * margin);
    traj.segments()
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let d = seg.duration;
            let h = thrust_sq_poly(traj, i, vehicle)?;
            let thrust_max = check(&h, tau_max.powi(2), d)?;
            let thrust_min = check(&-&h, -tau_min.powi(2), d)?;
            let strict = if params.strict_bounds {
                let lim = &vehicle.limits;
                let scalar = |kind| -> Result<Polynomial<f64>> {
                    Ok(actuator_bound_poly(traj, i, kind, vehicle)?
                        .scalar()
                        .cloned()
                        .expect("scalar bound kind"))
                };
                let moment = actuator_bound_poly(traj, i, BoundKind::Moment, vehicle)?;
                let m = moment.per_axis().expect("per-axis bound kind");
                Some(StrictCertificate {
                    thrust_rate: check(&scalar(BoundKind::ThrustRateSq)?, lim.thrust_rate.powi(2), d)?,
                    omega: check(&scalar(BoundKind::OmegaSq)?, lim.omega.powi(2), d)?,
                    omega_dot: check(&scalar(BoundKind::OmegaDotSq)?, lim.omega_dot.powi(2), d)?,
                    moment: [
                        check(&m[0], lim.moment[0].powi(2), d)?,
                        check(&m[1], lim.moment[1].powi(2), d)?,
                        check(&m[2], lim.moment[2].powi(2), d)?,
                    ],
                })
            } else {
                None
            };
            Ok(SegmentCertificate {
                segment: i,
                duration: d,
                thrust_max,
                thrust_min,
                strict,
            })
        })
        .collect()
}

/// Plans a perching trajectory from `start`.
///
/// With `prev`, the remaining horizon and its last knot are inherited and the
/// field-of-view rows are linearized along the previous trajectory. A failed
/// attempt (non-optimal solve or thrust certificate) first relaxes the rows of
/// points already outside the cone, then drops the field-of-view rows; once
/// they are gone, failures stretch every segment by `time_stretch`, up to
/// `max_stretch_iters` times.
pub fn plan(
    start: &FlatState,
    target: &PerchTarget,
    params: &PlanParams,
    vehicle: &VehicleParams,
    prev: Option<PreviousPlan>,
) -> Result<(Spline64, PlanDiagnostics)> {
    let stage = if params.fov_enabled && prev.is_some() {
        FovStage::Full
    } else {
        FovStage::Off
    };
    plan_inner(start, target, params, vehicle, prev, stage)
}

/// Same problem as [`plan`] without field-of-view rows; flags the drop.
pub fn relax_fov_and_replan(
    start: &FlatState,
    target: &PerchTarget,
    params: &PlanParams,
    vehicle: &VehicleParams,
    prev: Option<PreviousPlan>,
) -> Result<(Spline64, PlanDiagnostics)> {
    let (traj, mut diag) = plan_inner(start, target, params, vehicle, prev, FovStage::Off)?;
    diag.fov_dropped = true;
    Ok((traj, diag))
}

fn plan_inner(
    start: &FlatState,
    target: &PerchTarget,
    params: &PlanParams,
    vehicle: &VehicleParams,
    prev: Option<PreviousPlan>,
    mut stage: FovStage,
) -> Result<(Spline64, PlanDiagnostics)> {
    params.validate()?;
    vehicle.validate()?;
    target.validate()?;
    if !start.is_finite() {
        return Err(Error::InvalidInput("start state is not finite".into()));
    }
    let mut durations = initial_durations(start, target, params, prev)?;
    let end = EndpointSpec::perch(target, params, target.contact_yaw(start.psi));
    let mut fov_dropped = false;
    let mut stretch_count = 0;
    let mut solves = 0;
    let mut last_reason;
    loop {
        let layout = SplineLayout::new(durations.clone(), params.degree)?;
        let attempt = solve_once(start, target, &end, params, vehicle, prev, &layout, stage)?;
        solves += 1;
        let status = attempt.solution.status;
        if status == QpStatus::Optimal {
            let traj = layout.to_spline(&attempt.solution.c)?;
            let margin = if prev.is_none() {
                params.initial_thrust_margin
            } else {
                1.0
            };
            let certificates = certify_with_margin(&traj, params, vehicle, margin)?;
            if certificates.iter().all(|c| c.passed()) {
                let acc = target.endpoint_acceleration(params.alpha, vehicle.gravity);
                let tf = traj.duration();
                let a_end = Vector3::from_fn(|i, _| traj.eval(i, tf, 2));
                let diag = PlanDiagnostics {
                    stretch_count,
                    solves,
                    status,
                    iterations: attempt.solution.iterations,
                    fov_dropped,
                    fov_stage: stage,
                    fov_relaxed: attempt.fov_relaxed,
                    fov_rows: attempt.fov_rows,
                    fov_points: attempt.fov_points,
                    fov_skipped: attempt.fov_skipped,
                    durations: durations.clone(),
                    certificates,
                    kkt: kkt_residuals(&attempt.problem, &attempt.solution)?,
                    endpoint_residual: (a_end - acc).norm(),
                    band_violation: attempt.band.violation(&attempt.solution.c),
                    continuity_defect: traj.continuity_defect(4),
                };
                return Ok((traj, diag));
            }
            last_reason = "thrust certificate failed".to_string();
        } else {
            last_reason = format!("QP status {status:?}");
        }
        match stage {
            FovStage::Full => {
                stage = FovStage::Relaxed;
                continue;
            }
            FovStage::Relaxed => {
                stage = FovStage::Off;
                fov_dropped = true;
                continue;
            }
            FovStage::Off => {}
        }
        if stretch_count >= params.max_stretch_iters {
            return Err(Error::PlanningFailed(format!(
                "{last_reason} after {stretch_count} time stretches"
            )));
        }
        durations.iter_mut().for_each(|d| *d *= params.time_stretch);
        stretch_count += 1;
    }
}

/// Sample times of the pre-impact band on a planned trajectory.
pub fn pre_impact_times(traj: &Spline64, params: &PlanParams) -> Vec<f64> {
    band_times(traj.duration(), params)
}
