use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::constraints::ConstraintRows;
use super::layout::{SplineLayout, YAW};
use super::params::PlanParams;
use super::target::PerchTarget;
use crate::error::Result;
use crate::flatmap::{rotation_from_flat, FlatState, VehicleParams};
use crate::Spline64;

/// Central-difference step of the cone gradients.
pub const FOV_GRAD_STEP: f64 = 1e-6;

/// Cone test quantities: the target's offset from the optical axis `f`, the
/// allowed offset `g = (r/h)‖n_proj‖`, and the signed depth along the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovEval {
    pub f: f64,
    pub g: f64,
    pub depth: f64,
}

impl FovEval {
    pub fn residual(&self) -> f64 {
        self.f - self.g
    }

    pub fn inside(&self) -> bool {
        self.depth > 0.0 && self.f <= self.g
    }
}

/// Camera axis in the world frame for a body attitude given by flat outputs.
pub fn camera_axis_world(
    a: &Vector3<f64>,
    psi: f64,
    camera_axis_body: &Vector3<f64>,
    vehicle: &VehicleParams,
) -> Result<Vector3<f64>> {
    Ok(rotation_from_flat(a, psi, vehicle)? * camera_axis_body)
}

pub fn cone_eval(x: &Vector3<f64>, axis: &Vector3<f64>, target: &Vector3<f64>, ratio: f64) -> FovEval {
    let nd = target - x;
    let depth = nd.dot(axis);
    let proj = axis * depth;
    FovEval {
        f: (nd - proj).norm(),
        g: ratio * proj.norm(),
        depth,
    }
}

pub fn fov_nonlinear_eval(
    x: &Vector3<f64>,
    psi: f64,
    a: &Vector3<f64>,
    target: &PerchTarget,
    ratio: f64,
    camera_axis_body: &Vector3<f64>,
    vehicle: &VehicleParams,
) -> Result<FovEval> {
    let axis = camera_axis_world(a, psi, camera_axis_body, vehicle)?;
    Ok(cone_eval(x, &axis, &target.s, ratio))
}

/// First-order model of `f − g` in `(x, ψ, a)` around an expansion point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovLinearization {
    pub x0: Vector3<f64>,
    pub psi0: f64,
    pub a0: Vector3<f64>,
    pub value: f64,
    pub grad_x: Vector3<f64>,
    pub grad_psi: f64,
    pub grad_a: Vector3<f64>,
}

impl FovLinearization {
    pub fn eval(&self, x: &Vector3<f64>, psi: f64, a: &Vector3<f64>) -> f64 {
        self.value
            + self.grad_x.dot(&(x - self.x0))
            + self.grad_psi * (psi - self.psi0)
            + self.grad_a.dot(&(a - self.a0))
    }
}

fn pack(x: &Vector3<f64>, psi: f64, a: &Vector3<f64>) -> SVector<f64, 7> {
    SVector::<f64, 7>::from_column_slice(&[x.x, x.y, x.z, psi, a.x, a.y, a.z])
}

pub fn linearize_fov(
    x0: &Vector3<f64>,
    psi0: f64,
    a0: &Vector3<f64>,
    target: &PerchTarget,
    ratio: f64,
    camera_axis_body: &Vector3<f64>,
    vehicle: &VehicleParams,
) -> Result<FovLinearization> {
    let z0 = pack(x0, psi0, a0);
    let h = |z: &SVector<f64, 7>| -> Result<f64> {
        let x = Vector3::new(z[0], z[1], z[2]);
        let a = Vector3::new(z[4], z[5], z[6]);
        Ok(fov_nonlinear_eval(&x, z[3], &a, target, ratio, camera_axis_body, vehicle)?.residual())
    };
    let value = h(&z0)?;
    let mut grad = SVector::<f64, 7>::zeros();
    for i in 0..7 {
        let mut zp = z0;
        let mut zm = z0;
        zp[i] += FOV_GRAD_STEP;
        zm[i] -= FOV_GRAD_STEP;
        grad[i] = (h(&zp)? - h(&zm)?) / (2.0 * FOV_GRAD_STEP);
    }
    Ok(FovLinearization {
        x0: *x0,
        psi0,
        a0: *a0,
        value,
        grad_x: Vector3::new(grad[0], grad[1], grad[2]),
        grad_psi: grad[3],
        grad_a: Vector3::new(grad[4], grad[5], grad[6]),
    })
}

/// Expansion point on the previous trajectory that was left out, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub t: f64,
    pub reason: String,
}

/// Cone row of one expansion point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeRow {
    /// Index into [`FovRows::rows`].
    pub row: usize,
    pub t: f64,
    /// `f − g` at the expansion point; positive when the target is outside.
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FovRows {
    pub rows: ConstraintRows,
    pub points: Vec<f64>,
    pub skipped: Vec<SkippedPoint>,
    pub cone: Vec<ConeRow>,
}

impl FovRows {
    /// Points whose expansion already has the target outside the cone.
    pub fn violating(&self) -> usize {
        self.cone.iter().filter(|c| c.value > 0.0).count()
    }

    /// Turns the cone rows of violating points into "no worse than the
    /// expansion point" rows. Returns how many rows changed.
    pub fn relax_violating(&mut self) -> usize {
        let mut n = 0;
        for c in &self.cone {
            if c.value > 0.0 {
                self.rows.upper[c.row] += c.value;
                n += 1;
            }
        }
        n
    }
}

/// Linearized cone rows and trust boxes at `n_p` interior points of the new
/// trajectory, expanded around the previous trajectory at the proportionally
/// mapped time. Points where the previous trajectory has the target behind
/// the camera (or a singular attitude) are skipped.
pub fn build_fov_constraints(
    prev: &Spline64,
    t_now: f64,
    target: &PerchTarget,
    params: &PlanParams,
    vehicle: &VehicleParams,
    layout: &SplineLayout,
) -> FovRows {
    let mut out = FovRows::default();
    let total = layout.total();
    let prev_rem = (prev.duration() - t_now).max(0.0);
    let r_pos = params.trust_pos / 3f64.sqrt();
    let r_acc = params.trust_acc / 3f64.sqrt();
    for k in 1..=params.n_p {
        let t = total * k as f64 / (params.n_p + 1) as f64;
        let t_prev = t_now + t * prev_rem / total;
        let s0 = FlatState::from_spline(prev, t_prev);
        let lin = match fov_nonlinear_eval(
            &s0.x,
            s0.psi,
            &s0.a,
            target,
            params.fov_ratio,
            &params.camera_axis,
            vehicle,
        ) {
            Ok(e) if e.depth <= 0.0 => Err("target behind camera".to_string()),
            Ok(_) => linearize_fov(
                &s0.x,
                s0.psi,
                &s0.a,
                target,
                params.fov_ratio,
                &params.camera_axis,
                vehicle,
            )
            .map_err(|e| e.to_string()),
            Err(e) => Err(e.to_string()),
        };
        let lin = match lin {
            Ok(l) => l,
            Err(reason) => {
                out.skipped.push(SkippedPoint { t, reason });
                continue;
            }
        };
        let mut row = layout.zero_row();
        for axis in 0..3 {
            layout.add_basis_at(&mut row, t, axis, 0, lin.grad_x[axis]);
            layout.add_basis_at(&mut row, t, axis, 2, lin.grad_a[axis]);
        }
        layout.add_basis_at(&mut row, t, YAW, 0, lin.grad_psi);
        let offset = lin.grad_x.dot(&lin.x0) + lin.grad_psi * lin.psi0 + lin.grad_a.dot(&lin.a0);
        out.cone.push(ConeRow {
            row: out.rows.len(),
            t,
            value: lin.value,
        });
        out.rows.push_range(row, f64::NEG_INFINITY, offset - lin.value);
        for axis in 0..3 {
            for (order, center, r) in [(0, lin.x0[axis], r_pos), (2, lin.a0[axis], r_acc)] {
                let mut row = layout.zero_row();
                layout.add_basis_at(&mut row, t, axis, order, 1.0);
                out.rows.push_range(row, center - r, center + r);
            }
        }
        let mut row = layout.zero_row();
        layout.add_basis_at(&mut row, t, YAW, 0, 1.0);
        out.rows
            .push_range(row, lin.psi0 - params.trust_yaw, lin.psi0 + params.trust_yaw);
        out.points.push(t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup() -> (PerchTarget, VehicleParams, f64) {
        (
            PerchTarget::from_incline(Vector3::zeros(), 90.0).unwrap(),
            VehicleParams::default(),
            35f64.to_radians().tan(),
        )
    }

    #[test]
    fn on_axis_and_cone_boundary() {
        let (t, v, ratio) = setup();
        // hover at +x facing -x (yaw π)
        let x = Vector3::new(2.0, 0.0, 0.0);
        let e = fov_nonlinear_eval(&x, PI, &Vector3::zeros(), &t, ratio, &Vector3::x(), &v).unwrap();
        assert!(e.f.abs() < 1e-12 && e.inside());
        // rotate heading by the half angle
        let psi = PI + 35f64.to_radians();
        let e = fov_nonlinear_eval(&x, psi, &Vector3::zeros(), &t, ratio, &Vector3::x(), &v).unwrap();
        assert!((e.f - e.g).abs() < 1e-9, "{e:?}");
        let e = fov_nonlinear_eval(&x, 0.0, &Vector3::zeros(), &t, ratio, &Vector3::x(), &v).unwrap();
        assert!(!e.inside());
    }

    #[test]
    fn linear_model_exact_at_expansion_point() {
        let (t, v, ratio) = setup();
        let x = Vector3::new(1.5, 0.2, 0.3);
        let a = Vector3::new(-1.0, 0.5, 0.8);
        let lin = linearize_fov(&x, 3.0, &a, &t, ratio, &Vector3::x(), &v).unwrap();
        let e = fov_nonlinear_eval(&x, 3.0, &a, &t, ratio, &Vector3::x(), &v).unwrap();
        assert_eq!(lin.eval(&x, 3.0, &a), e.residual());
        // gradient agrees with a coarser step
        let h = 1e-4;
        let ep = fov_nonlinear_eval(&(x + Vector3::y() * h), 3.0, &a, &t, ratio, &Vector3::x(), &v).unwrap();
        let em = fov_nonlinear_eval(&(x - Vector3::y() * h), 3.0, &a, &t, ratio, &Vector3::x(), &v).unwrap();
        assert!(((ep.residual() - em.residual()) / (2.0 * h) - lin.grad_x.y).abs() < 1e-5);
    }
}
