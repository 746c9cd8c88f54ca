//! Receding replanning: anticipate the flat state at swap time, replan from it
//! with camera-cone rows along the active trajectory, swap at the anticipated
//! instant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatmap::{FlatState, VehicleParams};
use crate::planner::{plan, PerchTarget, PlanDiagnostics, PlanParams, PreviousPlan};
use crate::Spline64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anticipation {
    pub state: FlatState,
    /// A query time fell outside the trajectory and was clamped.
    pub clamped: bool,
}

/// `x₀ = x_n + P(t_ex) − P(t_rp)` for position through snap and for yaw
/// through yaw acceleration.
pub fn anticipate(odom: &FlatState, traj: &Spline64, t_rp: f64, t_ex: f64) -> Anticipation {
    let tf = traj.duration();
    let clamp = |t: f64| t.clamp(0.0, tf);
    let (rp, ex) = (clamp(t_rp), clamp(t_ex));
    let clamped = rp != t_rp || ex != t_ex;
    if t_ex == t_rp {
        return Anticipation { state: *odom, clamped };
    }
    let at_rp = FlatState::from_spline(traj, rp);
    let at_ex = FlatState::from_spline(traj, ex);
    let shift = |order: usize| {
        at_ex.position_derivative(order) + (odom.position_derivative(order) - at_rp.position_derivative(order))
    };
    let yaw = |order: usize| at_ex.yaw_derivative(order) + (odom.yaw_derivative(order) - at_rp.yaw_derivative(order));
    Anticipation {
        state: FlatState {
            x: shift(0),
            v: shift(1),
            a: shift(2),
            j: shift(3),
            snap: shift(4),
            psi: yaw(0),
            psi_dot: yaw(1),
            psi_ddot: yaw(2),
        },
        clamped,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AvpConfig {
    pub replan_period: f64,
    pub expected_plan_latency: f64,
    pub capture_radius: f64,
    /// Measurements older than this are ignored, s.
    pub stale_after: f64,
    /// No replanning once less than this much trajectory is left, s.
    pub min_remaining: f64,
    /// Time stretches a replan may take before it counts as failed.
    pub max_replan_stretches: usize,
}

impl Default for AvpConfig {
    fn default() -> Self {
        Self {
            replan_period: 1.0 / 30.0,
            expected_plan_latency: 0.02,
            capture_radius: 0.05,
            stale_after: 0.2,
            min_remaining: 0.25,
            max_replan_stretches: 0,
        }
    }
}

impl AvpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.replan_period > 0.0)
            || !(self.expected_plan_latency >= 0.0 && self.expected_plan_latency < self.replan_period)
        {
            return Err(Error::InvalidInput(
                "need replan_period > 0 and 0 ≤ latency < replan_period".into(),
            ));
        }
        Ok(())
    }
}

/// Latest target estimate and the time it was taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetMeasurement {
    pub target: PerchTarget,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingSwap {
    pub traj: Spline64,
    pub swap_time: f64,
    /// Anticipated start state the new trajectory was planned from.
    pub anticipated: FlatState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    Terminated,
    NoMeasurement,
    StaleMeasurement,
    HorizonTooShort,
    Replanned,
    PlanFailed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvpState {
    pub active_traj: Spline64,
    /// Wall time at which `active_traj` starts.
    pub traj_start_wall_time: f64,
    pub config: AvpConfig,
    pub pending: Option<PendingSwap>,
    pub fov_dropped_count: usize,
    pub terminated: bool,
    pub replans: usize,
    pub plan_failures: usize,
    /// Incremented on every swap.
    pub traj_id: usize,
    pub last_diagnostics: Option<PlanDiagnostics>,
}

impl AvpState {
    pub fn new(traj: Spline64, start_time: f64, config: AvpConfig) -> Self {
        Self {
            active_traj: traj,
            traj_start_wall_time: start_time,
            config,
            pending: None,
            fov_dropped_count: 0,
            terminated: false,
            replans: 0,
            plan_failures: 0,
            traj_id: 0,
            last_diagnostics: None,
        }
    }

    /// Time on the active trajectory at wall time `now`.
    pub fn local_time(&self, now: f64) -> f64 {
        now - self.traj_start_wall_time
    }

    pub fn remaining(&self, now: f64) -> f64 {
        self.active_traj.duration() - self.local_time(now)
    }

    /// Makes a pending trajectory active once its swap time is reached.
    /// Returns the swapped-in plan's anticipated start state.
    pub fn poll_swap(&mut self, now: f64) -> Option<FlatState> {
        if self.pending.as_ref().is_some_and(|p| now >= p.swap_time - 1e-9) {
            let p = self.pending.take().unwrap();
            self.active_traj = p.traj;
            self.traj_start_wall_time = p.swap_time;
            self.traj_id += 1;
            return Some(p.anticipated);
        }
        None
    }

    /// One replanning cycle at wall time `now` (`t_rp`); the result becomes
    /// active at `t_ex = t_rp + expected_plan_latency`.
    pub fn avp_step(
        &mut self,
        now: f64,
        odom: &FlatState,
        meas: Option<&TargetMeasurement>,
        params: &PlanParams,
        vehicle: &VehicleParams,
    ) -> StepOutcome {
        if self.terminated {
            return StepOutcome::Terminated;
        }
        let Some(meas) = meas else {
            return StepOutcome::NoMeasurement;
        };
        if (odom.x - meas.target.s).norm() < self.config.capture_radius {
            self.terminated = true;
            self.pending = None;
            return StepOutcome::Terminated;
        }
        if now - meas.time > self.config.stale_after {
            return StepOutcome::StaleMeasurement;
        }
        let latency = self.config.expected_plan_latency;
        if self.remaining(now) - latency < self.config.min_remaining {
            return StepOutcome::HorizonTooShort;
        }
        let t_rp = self.local_time(now);
        let t_ex = t_rp + latency;
        let x0 = anticipate(odom, &self.active_traj, t_rp, t_ex).state;
        let prev = PreviousPlan {
            traj: &self.active_traj,
            t_now: t_ex,
        };
        let params = PlanParams {
            max_stretch_iters: params.max_stretch_iters.min(self.config.max_replan_stretches),
            ..params.clone()
        };
        match plan(&x0, &meas.target, &params, vehicle, Some(prev)) {
            Ok((traj, diag)) => {
                if diag.fov_dropped {
                    self.fov_dropped_count += 1;
                }
                self.replans += 1;
                self.last_diagnostics = Some(diag);
                self.pending = Some(PendingSwap {
                    traj,
                    swap_time: now + latency,
                    anticipated: x0,
                });
                StepOutcome::Replanned
            }
            Err(e) => {
                self.plan_failures += 1;
                StepOutcome::PlanFailed(e.to_string())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::{Polynomial, Segment, Spline};
    use nalgebra::Vector3;

    fn traj() -> Spline64 {
        let p = |c: &[f64]| Polynomial::from_f64(c);
        Spline::new(vec![Segment {
            axes: vec![
                p(&[0.0, 1.0, 0.5, 0.1, 0.01]),
                p(&[1.0, -0.5, 0.2]),
                p(&[2.0, 0.0, 0.0, 0.3]),
                p(&[0.1, 0.2]),
            ],
            duration: 2.0,
        }])
        .unwrap()
    }

    #[test]
    fn identity_when_times_match() {
        let odom = FlatState::hover(Vector3::new(0.3, 0.1, -0.2), 0.4);
        let a = anticipate(&odom, &traj(), 0.7, 0.7);
        assert_eq!(a.state, odom);
        assert!(!a.clamped);
    }

    #[test]
    fn on_trajectory_odometry_is_exact() {
        let t = traj();
        let odom = FlatState::from_spline(&t, 0.5);
        let a = anticipate(&odom, &t, 0.5, 0.52);
        assert_eq!(a.state, FlatState::from_spline(&t, 0.52));
    }

    #[test]
    fn offsets_carry_over() {
        let t = traj();
        let mut odom = FlatState::from_spline(&t, 0.5);
        let d = Vector3::new(0.01, -0.02, 0.03);
        odom.x += d;
        let a = anticipate(&odom, &t, 0.5, 0.6);
        let want = FlatState::from_spline(&t, 0.6).x + d;
        assert!((a.state.x - want).norm() < 1e-12);
        assert!(anticipate(&odom, &t, 1.95, 2.1).clamped);
    }

    #[test]
    fn capture_terminates() {
        let t = traj();
        let mut avp = AvpState::new(t.clone(), 0.0, AvpConfig::default());
        let target = PerchTarget::from_incline(Vector3::new(0.0, 1.0, 2.0), 90.0).unwrap();
        let meas = TargetMeasurement { target, time: 0.0 };
        let odom = FlatState::hover(Vector3::new(0.01, 1.0, 2.0), 0.0);
        let p = PlanParams::default();
        let v = VehicleParams::default();
        assert_eq!(avp.avp_step(0.0, &odom, Some(&meas), &p, &v), StepOutcome::Terminated);
        assert_eq!(avp.avp_step(0.1, &odom, Some(&meas), &p, &v), StepOutcome::Terminated);
        assert_eq!(avp.replans, 0);
    }
}
