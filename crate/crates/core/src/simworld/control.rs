use nalgebra::{Matrix3, Vector3};

use super::dynamics::{hat, vee, RigidState};
use crate::flatmap::{rotation_from_thrust_dir, ReferenceCommand, VehicleParams, SINGULAR_EPS};

/// Tracking reference: desired position derivatives, heading, attitude and
/// body-rate feed-forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlReference {
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
    pub a: Vector3<f64>,
    pub psi: f64,
    pub r_c: Matrix3<f64>,
    pub omega_c: Vector3<f64>,
    pub omega_dot_c: Vector3<f64>,
}

impl ControlReference {
    pub fn hover(x: Vector3<f64>, psi: f64) -> Self {
        Self {
            x,
            v: Vector3::zeros(),
            a: Vector3::zeros(),
            psi,
            r_c: *nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), psi).matrix(),
            omega_c: Vector3::zeros(),
            omega_dot_c: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.v.iter())
            .chain(self.a.iter())
            .chain(self.r_c.iter())
            .chain(self.omega_c.iter())
            .chain(self.omega_dot_c.iter())
            .all(|c| c.is_finite())
            && self.psi.is_finite()
    }
}

impl From<&ReferenceCommand> for ControlReference {
    fn from(c: &ReferenceCommand) -> Self {
        Self {
            x: c.flat.x,
            v: c.flat.v,
            a: c.flat.a,
            psi: c.flat.psi,
            r_c: c.r,
            omega_c: c.omega,
            omega_dot_c: c.omega_dot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub tau: f64,
    pub moment: Vector3<f64>,
    /// Desired force vector `f`.
    pub force: Vector3<f64>,
    /// Attitude actually tracked.
    pub r_cmd: Matrix3<f64>,
    pub e_r: Vector3<f64>,
}

/// Geometric SE(3) tracking law.
///
/// The tracked attitude aligns `b₃` with the desired force and keeps the
/// reference heading; it falls back to `reference.r_c` when that is singular.
pub fn geometric_control(state: &RigidState, reference: &ControlReference, vehicle: &VehicleParams) -> ControlOutput {
    let m = vehicle.mass;
    let j = &vehicle.inertia;
    let e_x = state.x - reference.x;
    let e_v = state.v - reference.v;
    let force = -e_x.component_mul(&vehicle.k_x) - e_v.component_mul(&vehicle.k_v)
        + Vector3::z() * (m * vehicle.gravity)
        + reference.a * m;
    let tau = force.dot(&state.r.column(2));

    let fnorm = force.norm();
    let r_c = if fnorm > SINGULAR_EPS {
        rotation_from_thrust_dir(&(force / fnorm), reference.psi).unwrap_or(reference.r_c)
    } else {
        reference.r_c
    };
    let r = &state.r;
    let e_r = vee(&(r_c.transpose() * r - r.transpose() * r_c)) * 0.5;
    let rt_rc = r.transpose() * r_c;
    let w_c = rt_rc * reference.omega_c;
    let e_w = state.omega - w_c;
    let moment = -e_r.component_mul(&vehicle.k_r) - e_w.component_mul(&vehicle.k_omega)
        + state.omega.cross(&(j * state.omega))
        - j * (hat(&state.omega) * w_c - rt_rc * reference.omega_dot_c);
    ControlOutput {
        tau,
        moment,
        force,
        r_cmd: r_c,
        e_r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::dynamics::dynamics_step;

    #[test]
    fn hover_reference_gives_weight() {
        let v = VehicleParams::default();
        let s = RigidState::hover(Vector3::new(0.0, 0.0, 1.0), 0.3);
        let out = geometric_control(&s, &ControlReference::hover(s.x, 0.3), &v);
        assert!((out.tau - v.weight()).abs() < 1e-12);
        assert!(out.moment.norm() < 1e-12);
    }

    #[test]
    fn position_error_enters_force() {
        let v = VehicleParams::default();
        let mut s = RigidState::hover(Vector3::zeros(), 0.0);
        s.x.x += 0.1;
        let out = geometric_control(&s, &ControlReference::hover(Vector3::zeros(), 0.0), &v);
        assert!((out.force.x + v.k_x.x * 0.1).abs() < 1e-12);
        assert!((out.tau - v.weight()).abs() < 1e-12);
    }

    #[test]
    fn step_response_converges() {
        let v = VehicleParams::default();
        let goal = Vector3::new(0.0, 0.0, 1.0);
        let reference = ControlReference::hover(goal, 0.0);
        let mut s = RigidState::hover(goal + Vector3::new(0.2, 0.0, 0.0), 0.0);
        let dt = 1e-3;
        let mut out = geometric_control(&s, &reference, &v);
        for k in 0..3000 {
            if k % 2 == 0 {
                out = geometric_control(&s, &reference, &v);
            }
            s = dynamics_step(&s, out.tau, &out.moment, dt, &v);
        }
        assert!((s.x - goal).norm() < 0.01, "{}", (s.x - goal).norm());
    }
}
