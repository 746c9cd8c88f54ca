use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::camera::{detect_target, CameraModel};
use super::control::{geometric_control, ControlOutput, ControlReference};
use super::dynamics::{dynamics_step, RigidState};
use crate::error::{Error, Result};
use crate::flatmap::{reference_command, FlatState, VehicleParams};
use crate::planner::{camera_axis_world, cone_eval, plan, FovStage, PerchTarget, PlanParams};
use crate::replanner::{AvpState, StepOutcome, TargetMeasurement};
use crate::scenario::{PerchScenario, RunMode};
use crate::Spline64;

/// RNG sub-streams derived from the episode seed.
pub const DETECTOR_STREAM: u64 = 1;
pub const CONTROL_NOISE_STREAM: u64 = 2;

pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub state: RigidState,
    pub x_ref: Vector3<f64>,
    pub v_ref: Vector3<f64>,
    pub a_ref: Vector3<f64>,
    pub psi_ref: f64,
    pub tau: f64,
    pub moment: Vector3<f64>,
    /// Pad center inside the true camera cone.
    pub visible: bool,
    /// Measured pad center, when a detection happened at this step.
    pub detection: Option<Vector3<f64>>,
    pub traj_id: usize,
    /// A planned trajectory is being tracked (as opposed to the initial hover).
    pub maneuver: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub t: f64,
    /// Interpolated crossing point of the pad plane.
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
    pub tilt_deg: f64,
}

/// One replanning cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanEvent {
    pub t: f64,
    pub outcome: StepOutcome,
    pub stretch_count: Option<usize>,
    pub fov_stage: Option<FovStage>,
    /// Duration of the new trajectory.
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub target: PerchTarget,
    pub records: Vec<LogRecord>,
    pub contact: Option<ContactEvent>,
    pub replans: Vec<ReplanEvent>,
}

pub const LOG_HEADER: &str = "t,x,y,z,vx,vy,vz,r00,r01,r02,r10,r11,r12,r20,r21,r22,wx,wy,wz,\
x_ref,y_ref,z_ref,vx_ref,vy_ref,vz_ref,ax_ref,ay_ref,az_ref,psi_ref,tau,mx,my,mz,\
visible,sx_meas,sy_meas,sz_meas,traj_id,maneuver";

impl EpisodeLog {
    /// Comma-separated records under [`LOG_HEADER`].
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{LOG_HEADER}")?;
        for r in &self.records {
            let s = &r.state;
            let mut cols: Vec<String> = vec![r.t.to_string()];
            let push3 = |cols: &mut Vec<String>, v: &Vector3<f64>| cols.extend(v.iter().map(|c| c.to_string()));
            push3(&mut cols, &s.x);
            push3(&mut cols, &s.v);
            for i in 0..3 {
                for j in 0..3 {
                    cols.push(s.r[(i, j)].to_string());
                }
            }
            push3(&mut cols, &s.omega);
            push3(&mut cols, &r.x_ref);
            push3(&mut cols, &r.v_ref);
            push3(&mut cols, &r.a_ref);
            cols.push(r.psi_ref.to_string());
            cols.push(r.tau.to_string());
            push3(&mut cols, &r.moment);
            cols.push(u8::from(r.visible).to_string());
            match &r.detection {
                Some(d) => push3(&mut cols, d),
                None => cols.extend(std::iter::repeat_n(String::new(), 3)),
            }
            cols.push(r.traj_id.to_string());
            cols.push(u8::from(r.maneuver).to_string());
            writeln!(w, "{}", cols.join(","))?;
        }
        Ok(())
    }

    pub fn maneuver_records(&self) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().filter(|r| r.maneuver)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeOutcome {
    Contact,
    Timeout,
    Crash,
    TrajectoryEnded,
    PlanFailed,
    Diverged,
}

/// Flat per-episode summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub mode: RunMode,
    pub seed: u64,
    pub outcome: EpisodeOutcome,
    pub success: bool,
    pub end_time: f64,
    /// Miss distance along `s₂`.
    pub e_s2: Option<f64>,
    /// Miss distance along the other in-pad axis.
    pub e_s3: Option<f64>,
    pub tilt_deg: Option<f64>,
    pub contact_normal_speed: Option<f64>,
    pub temporal_visibility: f64,
    pub spatial_visibility: f64,
    pub tracking_rmse: f64,
    pub anticipation_rmse: Option<f64>,
    pub replans: usize,
    pub swaps: usize,
    pub plan_failures: usize,
    pub fov_dropped_count: usize,
    pub detections: usize,
    pub initial_stretch_count: Option<usize>,
    pub initial_duration: Option<f64>,
}

/// `t` is a multiple of `period` on the simulation grid.
fn fires(step: u64, dt: f64, period: f64) -> bool {
    let tick = |k: u64| ((k as f64 * dt) / period + 1e-9).floor();
    step == 0 || tick(step) > tick(step - 1)
}

fn gaussian3<R: Rng>(rng: &mut R, std: f64) -> Vector3<f64> {
    let mut g = || -> f64 { rng.sample(StandardNormal) };
    Vector3::new(g(), g(), g()) * std
}

fn tilt_deg(r: &Matrix3<f64>, target: &PerchTarget) -> f64 {
    r.column(2).dot(&target.s3()).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Flat state reported to the planner: measured position and velocity, the
/// remaining derivatives and yaw taken from the trajectory being tracked.
fn odometry(state: &RigidState, avp: Option<&AvpState>, psi_hover: f64, t: f64) -> FlatState {
    match avp {
        Some(avp) => {
            let local = avp.local_time(t).clamp(0.0, avp.active_traj.duration());
            let mut f = FlatState::from_spline(&avp.active_traj, local);
            f.x = state.x;
            f.v = state.v;
            f
        }
        None => FlatState {
            v: state.v,
            ..FlatState::hover(state.x, psi_hover)
        },
    }
}

/// Closed-loop perching episode.
pub fn run_episode(scenario: &PerchScenario, mode: RunMode, seed: u64) -> Result<(EpisodeLog, Metrics)> {
    scenario.validate()?;
    let vehicle = &scenario.vehicle;
    let camera = &scenario.camera;
    let sim = &scenario.sim;
    let target = scenario.target()?;
    let (x0, psi0) = scenario.start_pose()?;
    let params = PlanParams {
        fov_ratio: camera.ratio(),
        camera_axis: camera.axis_body,
        ..scenario.plan.clone()
    };

    let mut det_rng = rng_stream(seed, DETECTOR_STREAM);
    let mut noise_rng = rng_stream(seed, CONTROL_NOISE_STREAM);

    let mut state = RigidState::hover(x0, psi0);
    let mut latest: Option<TargetMeasurement> = None;
    let mut avp: Option<AvpState> = None;
    let mut odom = FlatState::hover(x0, psi0);
    let mut reference = ControlReference::hover(x0, psi0);
    let mut control = ControlOutput {
        tau: vehicle.weight(),
        moment: Vector3::zeros(),
        force: Vector3::z() * vehicle.weight(),
        r_cmd: state.r,
        e_r: Vector3::zeros(),
    };

    let mut records = Vec::new();
    let mut replans = Vec::new();
    let mut contact = None;
    let mut outcome = EpisodeOutcome::Timeout;
    let mut detections = 0;
    let mut track_sq = 0.0;
    let mut track_n = 0usize;
    let mut antic_sq = Vec::new();
    let mut initial = None;

    let steps = (sim.timeout / sim.dt).ceil() as u64;
    let mut t = 0.0;
    for step in 0..=steps {
        t = step as f64 * sim.dt;

        let mut detection = None;
        if fires(step, sim.dt, camera.detection_period) {
            if let Some(m) = detect_target(&state, &target, camera, &mut det_rng) {
                detections += 1;
                detection = Some(m.s);
                latest = Some(TargetMeasurement { target: m, time: t });
            }
        }

        let mut planned_now = false;
        if avp.is_none() {
            if let Some(meas) = &latest {
                let start = odometry(&state, None, psi0, t);
                match plan(&start, &meas.target, &params, vehicle, None) {
                    Ok((traj, diag)) => {
                        initial = Some((diag.stretch_count, traj.duration()));
                        avp = Some(AvpState::new(traj, t, scenario.avp.clone()));
                        planned_now = true;
                    }
                    Err(_) => {
                        outcome = EpisodeOutcome::PlanFailed;
                        break;
                    }
                }
            }
        }

        if let Some(a) = avp.as_mut() {
            if let Some(anticipated) = a.poll_swap(t) {
                antic_sq.push((state.x - anticipated.x).norm_squared());
            }
        }
        if fires(step, sim.dt, 1.0 / sim.odometry_rate_hz) {
            odom = odometry(&state, avp.as_ref(), psi0, t);
        }
        if mode == RunMode::Avp && !planned_now && fires(step, sim.dt, scenario.avp.replan_period) {
            if let Some(a) = avp.as_mut() {
                let outcome = a.avp_step(t, &odom, latest.as_ref(), &params, vehicle);
                let fresh = outcome == StepOutcome::Replanned;
                let diag = a.last_diagnostics.as_ref().filter(|_| fresh);
                replans.push(ReplanEvent {
                    t,
                    outcome,
                    stretch_count: diag.map(|d| d.stretch_count),
                    fov_stage: diag.map(|d| d.fov_stage),
                    duration: a.pending.as_ref().filter(|_| fresh).map(|p| p.traj.duration()),
                });
            }
        }

        let maneuver = avp.is_some();
        if fires(step, sim.dt, 1.0 / sim.control_rate_hz) {
            if let Some(a) = &avp {
                if let Ok(cmd) = reference_command(&a.active_traj, a.local_time(t), vehicle) {
                    reference = ControlReference::from(&cmd);
                }
            }
            let mut sensed = state;
            sensed.x += gaussian3(&mut noise_rng, scenario.noise.pos_std);
            sensed.v += gaussian3(&mut noise_rng, scenario.noise.vel_std);
            control = geometric_control(&sensed, &reference, vehicle);
            control.tau = control.tau.clamp(0.0, vehicle.tau_max);
            if maneuver {
                track_sq += (state.x - reference.x).norm_squared();
                track_n += 1;
            }
        }

        records.push(LogRecord {
            t,
            state,
            x_ref: reference.x,
            v_ref: reference.v,
            a_ref: reference.a,
            psi_ref: reference.psi,
            tau: control.tau,
            moment: control.moment,
            visible: camera.sees(&state, &target.s),
            detection,
            traj_id: avp.as_ref().map_or(0, |a| a.traj_id),
            maneuver,
        });

        let next = dynamics_step(&state, control.tau, &control.moment, sim.dt, vehicle);
        if !next.is_finite() {
            outcome = EpisodeOutcome::Diverged;
            break;
        }
        let d0 = (state.x - target.s).dot(&target.s3());
        let d1 = (next.x - target.s).dot(&target.s3());
        if d0 > 0.0 && d1 <= 0.0 {
            let lam = d0 / (d0 - d1);
            contact = Some(ContactEvent {
                t: t + lam * sim.dt,
                x: state.x + (next.x - state.x) * lam,
                v: state.v + (next.v - state.v) * lam,
                tilt_deg: tilt_deg(&next.r, &target),
            });
            outcome = EpisodeOutcome::Contact;
            break;
        }
        state = next;
        if state.x.z < sim.floor {
            outcome = EpisodeOutcome::Crash;
            break;
        }
        if let Some(a) = &avp {
            if a.local_time(t) > a.active_traj.duration() + sim.post_trajectory_time {
                outcome = EpisodeOutcome::TrajectoryEnded;
                break;
            }
        }
    }

    let log = EpisodeLog {
        target,
        records,
        contact,
        replans,
    };
    let (temporal, spatial) = visibility_metrics(&log).unwrap_or((0.0, 0.0));
    let errors = interception_error(&log).ok();
    let success = match (&contact, errors) {
        (Some(c), Some((e2, e3))) => e2.hypot(e3) <= sim.pad_radius && c.tilt_deg <= sim.max_tilt_deg,
        _ => false,
    };
    let rms = |sq: f64, n: usize| if n > 0 { (sq / n as f64).sqrt() } else { 0.0 };
    let metrics = Metrics {
        scenario: scenario.name.clone(),
        mode,
        seed,
        outcome,
        success,
        end_time: t,
        e_s2: errors.map(|e| e.0),
        e_s3: errors.map(|e| e.1),
        tilt_deg: contact.map(|c| c.tilt_deg),
        contact_normal_speed: contact.map(|c| -c.v.dot(&target.s3())),
        temporal_visibility: temporal,
        spatial_visibility: spatial,
        tracking_rmse: rms(track_sq, track_n),
        anticipation_rmse: (!antic_sq.is_empty()).then(|| rms(antic_sq.iter().sum(), antic_sq.len())),
        replans: avp.as_ref().map_or(0, |a| a.replans),
        swaps: avp.as_ref().map_or(0, |a| a.traj_id),
        plan_failures: avp.as_ref().map_or(0, |a| a.plan_failures),
        fov_dropped_count: avp.as_ref().map_or(0, |a| a.fov_dropped_count),
        detections,
        initial_stretch_count: initial.map(|i| i.0),
        initial_duration: initial.map(|i| i.1),
    };
    Ok((log, metrics))
}

/// Percent of maneuver time and of maneuver path length with the pad center
/// inside the true camera cone.
pub fn visibility_metrics(log: &EpisodeLog) -> Result<(f64, f64)> {
    let recs: Vec<&LogRecord> = log.maneuver_records().collect();
    if recs.is_empty() {
        return Err(Error::InvalidInput("log has no maneuver records".into()));
    }
    let temporal = 100.0 * recs.iter().filter(|r| r.visible).count() as f64 / recs.len() as f64;
    let (mut seen, mut total) = (0.0, 0.0);
    for w in recs.windows(2) {
        let ds = (w[1].state.x - w[0].state.x).norm();
        total += ds;
        if w[0].visible {
            seen += ds;
        }
    }
    let spatial = if total > 0.0 { 100.0 * seen / total } else { temporal };
    Ok((temporal, spatial))
}

/// Visibility along a planned path, with the attitude given by the flat
/// outputs: `(temporal %, spatial %)` over `samples + 1` evenly spaced times.
pub fn path_visibility(
    traj: &Spline64,
    target: &PerchTarget,
    camera: &CameraModel,
    vehicle: &VehicleParams,
    samples: usize,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one sample interval".into()));
    }
    let ratio = camera.ratio();
    let pts: Vec<(Vector3<f64>, bool)> = (0..=samples)
        .map(|i| {
            let s = FlatState::from_spline(traj, traj.duration() * i as f64 / samples as f64);
            let seen = camera_axis_world(&s.a, s.psi, &camera.axis_body, vehicle)
                .is_ok_and(|axis| cone_eval(&s.x, &axis, &target.s, ratio).inside());
            (s.x, seen)
        })
        .collect();
    let temporal = 100.0 * pts.iter().filter(|p| p.1).count() as f64 / pts.len() as f64;
    let (mut seen, mut total) = (0.0, 0.0);
    for w in pts.windows(2) {
        let ds = (w[1].0 - w[0].0).norm();
        total += ds;
        if w[0].1 {
            seen += ds;
        }
    }
    let spatial = if total > 0.0 { 100.0 * seen / total } else { temporal };
    Ok((temporal, spatial))
}

/// Contact point minus pad center along `s₂` and along the remaining in-pad
/// axis `s₁`.
pub fn interception_error(log: &EpisodeLog) -> Result<(f64, f64)> {
    let c = log
        .contact
        .as_ref()
        .ok_or_else(|| Error::EpisodeFailed("no contact with the pad plane".into()))?;
    let e = c.x - log.target.s;
    Ok((e.dot(&log.target.s2()), e.dot(&log.target.s1())))
}
