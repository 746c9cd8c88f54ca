use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::flatmap::VehicleParams;

/// Rigid-body state; `omega` is expressed in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidState {
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
    pub r: Matrix3<f64>,
    pub omega: Vector3<f64>,
}

impl RigidState {
    /// At rest at `x` with heading `psi`.
    pub fn hover(x: Vector3<f64>, psi: f64) -> Self {
        Self {
            x,
            v: Vector3::zeros(),
            r: *nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), psi).matrix(),
            omega: Vector3::zeros(),
        }
    }

    /// `‖RᵀR − I‖_F`
    pub fn so3_defect(&self) -> f64 {
        (self.r.transpose() * self.r - Matrix3::identity()).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.v.iter())
            .chain(self.r.iter())
            .chain(self.omega.iter())
            .all(|c| c.is_finite())
    }
}

pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Nearest rotation in the Frobenius sense (polar factor).
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut q = u * vt;
    if q.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        q = u * vt;
    }
    q
}

struct Deriv {
    dx: Vector3<f64>,
    dv: Vector3<f64>,
    dr: Matrix3<f64>,
    dw: Vector3<f64>,
}

struct Model<'a> {
    vehicle: &'a VehicleParams,
    j_inv: Matrix3<f64>,
    tau: f64,
    moment: Vector3<f64>,
}

impl Model<'_> {
    fn eval(&self, s: &RigidState) -> Deriv {
        let m = self.vehicle.mass;
        let j = &self.vehicle.inertia;
        let thrust = s.r.column(2) * (self.tau / m);
        Deriv {
            dx: s.v,
            dv: thrust - Vector3::z() * self.vehicle.gravity,
            dr: s.r * hat(&s.omega),
            dw: self.j_inv * (self.moment - s.omega.cross(&(j * s.omega))),
        }
    }
}

fn advance(s: &RigidState, d: &Deriv, h: f64) -> RigidState {
    RigidState {
        x: s.x + d.dx * h,
        v: s.v + d.dv * h,
        r: s.r + d.dr * h,
        omega: s.omega + d.dw * h,
    }
}

/// One RK4 step of the thrust/moment driven rigid body, followed by
/// projection of the attitude back onto SO(3).
pub fn dynamics_step(
    state: &RigidState,
    tau: f64,
    moment: &Vector3<f64>,
    dt: f64,
    vehicle: &VehicleParams,
) -> RigidState {
    let model = Model {
        vehicle,
        j_inv: vehicle.inertia.try_inverse().unwrap_or_else(Matrix3::zeros),
        tau,
        moment: *moment,
    };
    let k1 = model.eval(state);
    let k2 = model.eval(&advance(state, &k1, dt / 2.0));
    let k3 = model.eval(&advance(state, &k2, dt / 2.0));
    let k4 = model.eval(&advance(state, &k3, dt));
    let w = dt / 6.0;
    let comb = |a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>, d: Vector3<f64>| (a + (b + c) * 2.0 + d) * w;
    let r = state.r + (k1.dr + (k2.dr + k3.dr) * 2.0 + k4.dr) * w;
    RigidState {
        x: state.x + comb(k1.dx, k2.dx, k3.dx, k4.dx),
        v: state.v + comb(k1.dv, k2.dv, k3.dv, k4.dv),
        r: orthonormalize(&r),
        omega: state.omega + comb(k1.dw, k2.dw, k3.dw, k4.dw),
    }
}
