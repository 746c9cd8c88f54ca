use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanParams {
    /// Magnitude of the contact thrust direction term, m/s².
    pub alpha: f64,
    /// Pre-impact band tolerance.
    pub q: f64,
    /// Pre-impact window, s.
    pub t_k: f64,
    /// Sampling step inside the pre-impact window, s.
    pub dt: f64,
    /// Contact velocity along `s₁` (on the pad); `None` leaves it free.
    #[serde(with = "free_or_value")]
    pub v_s1: Option<f64>,
    /// Contact velocity along `s₃` (pad normal); `None` leaves it free.
    #[serde(with = "free_or_value")]
    pub v_s3: Option<f64>,
    /// Derivative order of the cost.
    pub deriv_order: usize,
    pub degree: usize,
    /// Number of linearized field-of-view sample points.
    pub n_p: usize,
    pub fov_enabled: bool,
    pub trust_pos: f64,
    pub trust_acc: f64,
    pub trust_yaw: f64,
    /// Cone ratio r/h of the camera.
    pub fov_ratio: f64,
    pub camera_axis: Vector3<f64>,
    pub time_stretch: f64,
    pub max_stretch_iters: usize,
    /// Average speed of the initial time guess, m/s.
    pub avg_speed: f64,
    pub min_time: f64,
    /// Multiplies the initial time guess.
    pub time_scale: f64,
    /// Overrides the initial time guess of a first plan, s.
    pub fixed_duration: Option<f64>,
    /// A plan made without a previous trajectory is certified against
    /// `[τ_min / m, m · τ_max]`, leaving replans room to move.
    pub initial_thrust_margin: f64,
    /// Also certify the flat-output actuator bounds, not only thrust.
    pub strict_bounds: bool,
    /// Cost weight of the yaw axis relative to position.
    pub yaw_weight: f64,
}

/// `None` is written as the string `"free"`, which text formats without a
/// null can still express.
pub mod free_or_value {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Value(f64),
        Word(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => Repr::Value(*x),
            None => Repr::Word("free".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Value(x) => Ok(Some(x)),
            Repr::Word(w) if w == "free" => Ok(None),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a number or \"free\", got \"{w}\""
            ))),
        }
    }
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            alpha: 4.0,
            q: 0.1,
            t_k: 0.15,
            dt: 0.01,
            v_s1: Some(0.3),
            v_s3: Some(-2.0),
            deriv_order: 4,
            degree: 9,
            n_p: 8,
            fov_enabled: true,
            trust_pos: 0.05,
            trust_acc: 0.2,
            trust_yaw: 0.1,
            fov_ratio: 35f64.to_radians().tan(),
            camera_axis: Vector3::x(),
            time_stretch: 1.2,
            max_stretch_iters: 20,
            avg_speed: 5.0,
            min_time: 0.5,
            time_scale: 1.0,
            fixed_duration: None,
            initial_thrust_margin: 1.0,
            strict_bounds: false,
            yaw_weight: 1.0,
        }
    }
}

impl PlanParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("plan params: {m}")));
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if !(self.q >= 0.0) {
            return bad("q must be non-negative");
        }
        if !(self.dt > 0.0 && self.dt < self.t_k) {
            return bad("need 0 < dt < t_k");
        }
        if self.n_p < 1 {
            return bad("n_p must be at least 1");
        }
        if !(self.trust_pos > 0.0 && self.trust_acc > 0.0 && self.trust_yaw > 0.0) {
            return bad("trust radii must be positive");
        }
        if self.degree < self.deriv_order || self.degree < 9 {
            return bad("degree must be at least 9 and not below the cost order");
        }
        if !(self.fov_ratio > 0.0) || !(self.time_stretch > 1.0) {
            return bad("fov_ratio > 0 and time_stretch > 1 required");
        }
        if !(self.initial_thrust_margin > 0.0 && self.initial_thrust_margin <= 1.0) {
            return bad("initial_thrust_margin must lie in (0, 1]");
        }
        if !(self.avg_speed > 0.0 && self.min_time > 0.0 && self.time_scale > 0.0) {
            return bad("time guess parameters must be positive");
        }
        if self.fixed_duration.is_some_and(|d| !(d > self.t_k)) {
            return bad("fixed_duration must exceed t_k");
        }
        if (self.camera_axis.norm() - 1.0).abs() > 1e-9 {
            return bad("camera axis must be a unit vector");
        }
        if self.v_s1.is_some_and(|v| !v.is_finite()) || self.v_s3.is_some_and(|v| !v.is_finite()) {
            return bad("contact velocities must be finite");
        }
        Ok(())
    }

    /// Number of pre-impact samples, `⌈t_k / dt⌉`.
    pub fn band_samples(&self) -> usize {
        (self.t_k / self.dt - 1e-9).ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let p = PlanParams::default();
        p.validate().unwrap();
        assert_eq!(p.band_samples(), 15);
        assert!((p.fov_ratio - 0.70021).abs() < 1e-5);
        let mut bad = p.clone();
        bad.dt = 0.2;
        assert!(bad.validate().is_err());
    }
}
