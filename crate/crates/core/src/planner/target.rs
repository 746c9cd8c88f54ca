use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Landing pad pose: center `s` and axes `R_S = [s₁ s₂ s₃]`.
///
/// `s₃` is the outward surface normal, i.e. the thrust axis at contact;
/// `s₁` and `s₂` span the pad, with `s₁` pointing up-slope on inclined pads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerchTarget {
    pub s: Vector3<f64>,
    pub r_s: Matrix3<f64>,
}

impl PerchTarget {
    pub fn new(s: Vector3<f64>, r_s: Matrix3<f64>) -> Result<Self> {
        let t = Self { s, r_s };
        t.validate()?;
        Ok(t)
    }

    /// Pad tilted `incline_deg` from horizontal, normal leaning towards `+e₁`.
    pub fn from_incline(s: Vector3<f64>, incline_deg: f64) -> Result<Self> {
        if !(0.0..=90.0).contains(&incline_deg) {
            return Err(Error::InvalidInput(format!("incline {incline_deg}° outside [0, 90]")));
        }
        let (sb, cb) = incline_deg.to_radians().sin_cos();
        let s3 = Vector3::new(sb, 0.0, cb);
        let s2 = -Vector3::y();
        let s1 = s2.cross(&s3);
        Self::new(s, Matrix3::from_columns(&[s1, s2, s3]))
    }

    pub fn validate(&self) -> Result<()> {
        let orth = (self.r_s.transpose() * self.r_s - Matrix3::identity()).norm();
        let det = self.r_s.determinant();
        if !(orth < 1e-9 && (det - 1.0).abs() < 1e-9) || !self.s.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "target frame not a rotation (‖RᵀR − I‖ = {orth:e}, det = {det})"
            )));
        }
        Ok(())
    }

    pub fn s1(&self) -> Vector3<f64> {
        self.r_s.column(0).into_owned()
    }

    pub fn s2(&self) -> Vector3<f64> {
        self.r_s.column(1).into_owned()
    }

    pub fn s3(&self) -> Vector3<f64> {
        self.r_s.column(2).into_owned()
    }

    /// Angle between the pad normal and `e₃`, in degrees.
    pub fn incline_deg(&self) -> f64 {
        self.s3().z.clamp(-1.0, 1.0).acos().to_degrees()
    }

    /// `α s₃ − g e₃`
    pub fn endpoint_acceleration(&self, alpha: f64, gravity: f64) -> Vector3<f64> {
        self.s3() * alpha - Vector3::z() * gravity
    }

    /// Heading whose flat-output attitude at contact reproduces `R_S`,
    /// unwrapped to the branch nearest `near`.
    pub fn contact_yaw(&self, near: f64) -> f64 {
        let s2 = self.s2();
        let psi = (-s2.x).atan2(s2.y);
        let tau = std::f64::consts::TAU;
        psi + tau * ((near - psi) / tau).round()
    }
}
