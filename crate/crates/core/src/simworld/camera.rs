use nalgebra::{Rotation3, Unit, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dynamics::RigidState;
use crate::error::{Error, Result};
use crate::planner::{cone_eval, PerchTarget};

/// Detector noise: `σ(d) = σ₀ (1 + k d²)` for position (per axis) and for
/// the rotation angle about a uniformly random axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionNoise {
    pub sigma0_pos: f64,
    pub k_pos: f64,
    pub sigma0_rot: f64,
    pub k_rot: f64,
}

impl Default for DetectionNoise {
    fn default() -> Self {
        Self {
            sigma0_pos: 0.005,
            k_pos: 0.08,
            sigma0_rot: 0.01,
            k_rot: 0.05,
        }
    }
}

impl DetectionNoise {
    pub fn zero() -> Self {
        Self {
            sigma0_pos: 0.0,
            k_pos: 0.0,
            sigma0_rot: 0.0,
            k_rot: 0.0,
        }
    }

    pub fn sigma_pos(&self, d: f64) -> f64 {
        self.sigma0_pos * (1.0 + self.k_pos * d * d)
    }

    pub fn sigma_rot(&self, d: f64) -> f64 {
        self.sigma0_rot * (1.0 + self.k_rot * d * d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub axis_body: Vector3<f64>,
    pub half_angle_deg: f64,
    pub detection_period: f64,
    pub noise: DetectionNoise,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            axis_body: Vector3::x(),
            half_angle_deg: 35.0,
            detection_period: 0.1,
            noise: DetectionNoise::default(),
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_angle_deg > 0.0 && self.half_angle_deg < 90.0) {
            return Err(Error::InvalidInput(format!(
                "camera half angle {}° outside (0, 90)",
                self.half_angle_deg
            )));
        }
        if !((self.axis_body.norm() - 1.0).abs() < 1e-9) {
            return Err(Error::InvalidInput("camera axis must be a unit vector".into()));
        }
        if !(self.detection_period > 0.0) {
            return Err(Error::InvalidInput("detection period must be positive".into()));
        }
        let n = &self.noise;
        if [n.sigma0_pos, n.k_pos, n.sigma0_rot, n.k_rot]
            .iter()
            .any(|&v| !(v >= 0.0))
        {
            return Err(Error::InvalidInput(
                "detection noise parameters must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Cone ratio `r/h`.
    pub fn ratio(&self) -> f64 {
        self.half_angle_deg.to_radians().tan()
    }

    /// Whether `point` lies inside the camera cone of the true state.
    pub fn sees(&self, state: &RigidState, point: &Vector3<f64>) -> bool {
        let axis = state.r * self.axis_body;
        cone_eval(&state.x, &axis, point, self.ratio()).inside()
    }
}

/// Noisy pad pose measurement, or `None` when the pad center is outside the
/// camera cone.
pub fn detect_target<R: Rng + ?Sized>(
    state: &RigidState,
    target: &PerchTarget,
    camera: &CameraModel,
    rng: &mut R,
) -> Option<PerchTarget> {
    if !camera.sees(state, &target.s) {
        return None;
    }
    let d = (target.s - state.x).norm();
    let mut gauss = || -> f64 { rng.sample(StandardNormal) };
    let sp = camera.noise.sigma_pos(d);
    let dp = Vector3::new(gauss(), gauss(), gauss()) * sp;
    let angle = gauss() * camera.noise.sigma_rot(d);
    let raw_axis = Vector3::new(gauss(), gauss(), gauss());
    let axis = Unit::try_new(raw_axis, 1e-12).unwrap_or(Vector3::z_axis());
    let rot = Rotation3::from_axis_angle(&axis, angle);
    Some(PerchTarget {
        s: target.s + dp,
        r_s: rot.matrix() * target.r_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn wall() -> PerchTarget {
        PerchTarget::from_incline(Vector3::new(0.0, 0.0, 1.5), 90.0).unwrap()
    }

    #[test]
    fn outside_cone_is_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cam = CameraModel::default();
        // facing away from the pad
        let s = RigidState::hover(Vector3::new(2.0, 0.0, 1.5), 0.0);
        assert!(detect_target(&s, &wall(), &cam, &mut rng).is_none());
        let s = RigidState::hover(Vector3::new(2.0, 0.0, 1.5), std::f64::consts::PI);
        assert!(detect_target(&s, &wall(), &cam, &mut rng).is_some());
    }

    #[test]
    fn zero_noise_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cam = CameraModel {
            noise: DetectionNoise::zero(),
            ..CameraModel::default()
        };
        let s = RigidState::hover(Vector3::new(3.0, 0.2, 1.4), std::f64::consts::PI);
        let m = detect_target(&s, &wall(), &cam, &mut rng).unwrap();
        assert_eq!(m.s, wall().s);
        assert_eq!(m.r_s, wall().r_s);
    }

    #[test]
    fn sigma_growth() {
        let n = DetectionNoise::default();
        assert!((n.sigma_pos(1.0) - 0.0054).abs() < 1e-12);
        assert!((n.sigma_pos(7.0) - 0.0246).abs() < 1e-12);
        let s: Vec<f64> = (0..10).map(|d| n.sigma_pos(d as f64)).collect();
        assert!(s.windows(3).all(|w| w[1] > w[0] && w[2] - w[1] > w[1] - w[0]));
    }

    #[test]
    fn empirical_spread_matches_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cam = CameraModel::default();
        let s = RigidState::hover(Vector3::new(5.0, 0.0, 1.5), std::f64::consts::PI);
        let n = 4000;
        let mut sq = 0.0;
        for _ in 0..n {
            let m = detect_target(&s, &wall(), &cam, &mut rng).unwrap();
            sq += (m.s - wall().s).x.powi(2);
            assert!(m.validate().is_ok());
        }
        let got = (sq / n as f64).sqrt();
        let want = cam.noise.sigma_pos(5.0);
        assert!((got / want - 1.0).abs() < 0.06, "{got} vs {want}");
    }
}
