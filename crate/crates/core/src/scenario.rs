//! Experiment configuration shared by the simulator and the command line.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatmap::VehicleParams;
use crate::planner::{PerchTarget, PlanParams};
use crate::replanner::AvpConfig;
use crate::simworld::CameraModel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    OneShot,
    #[default]
    Avp,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::OneShot => "one_shot",
            RunMode::Avp => "avp",
        }
    }
}

impl std::str::FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_shot" | "one-shot" | "oneshot" => Ok(RunMode::OneShot),
            "avp" => Ok(RunMode::Avp),
            other => Err(Error::InvalidInput(format!("unknown mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSpec {
    pub center: [f64; 3],
    pub incline_deg: f64,
}

impl Default for TargetSpec {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0, 1.5],
            incline_deg: 90.0,
        }
    }
}

/// Hover start. Unless `position` is given, the start is `distance` away from
/// the pad center along the horizontal direction of the pad normal, shifted
/// by `height` along `e₃` and `lateral` sideways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartSpec {
    pub distance: f64,
    pub height: f64,
    pub lateral: f64,
    pub position: Option<[f64; 3]>,
    /// Defaults to facing the pad.
    pub yaw: Option<f64>,
}

impl Default for StartSpec {
    fn default() -> Self {
        Self {
            distance: 1.5,
            height: 0.0,
            lateral: 0.0,
            position: None,
            yaw: None,
        }
    }
}

/// Zero-mean Gaussian noise on the state fed to the tracking controller.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlNoise {
    pub pos_std: f64,
    pub vel_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub dt: f64,
    pub control_rate_hz: f64,
    pub odometry_rate_hz: f64,
    pub timeout: f64,
    /// Crash below this height.
    pub floor: f64,
    /// Extra time allowed after the active trajectory ends.
    pub post_trajectory_time: f64,
    /// Largest in-plane miss distance counted as a successful perch.
    pub pad_radius: f64,
    /// Largest angle between `b₃` and the pad normal at contact.
    pub max_tilt_deg: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            control_rate_hz: 500.0,
            odometry_rate_hz: 300.0,
            timeout: 15.0,
            floor: 0.0,
            post_trajectory_time: 1.0,
            pad_radius: 0.10,
            max_tilt_deg: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerchScenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub target: TargetSpec,
    #[serde(default)]
    pub start: StartSpec,
    #[serde(default)]
    pub plan: PlanParams,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default)]
    pub noise: ControlNoise,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub avp: AvpConfig,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PerchScenario {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: String::new(),
            target: TargetSpec::default(),
            start: StartSpec::default(),
            plan: PlanParams::default(),
            vehicle: VehicleParams::default(),
            camera: CameraModel::default(),
            noise: ControlNoise::default(),
            sim: SimSettings::default(),
            avp: AvpConfig::default(),
            mode: RunMode::default(),
            seed: 0,
        }
    }
}

impl PerchScenario {
    /// Default scenario for a pad at `incline_deg`, starting `distance` away.
    pub fn perch(incline_deg: f64, distance: f64) -> Self {
        let mut s = Self::default();
        s.target.incline_deg = incline_deg;
        s.start.distance = distance;
        if incline_deg < 45.0 {
            s.start.height = 0.5;
        }
        s.name = format!("perch_{incline_deg}deg_{distance}m");
        s
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Scenario(format!("file not found: {}", path.display())),
            _ => Error::Io(e),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Scenario(format!(
                "schema_version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.target()?;
        self.plan.validate()?;
        self.vehicle.validate()?;
        self.camera.validate()?;
        self.avp.validate()?;
        let sim = &self.sim;
        let positive = [
            sim.dt,
            sim.control_rate_hz,
            sim.odometry_rate_hz,
            sim.timeout,
            sim.pad_radius,
        ];
        if positive.iter().any(|&v| !(v > 0.0)) || !(sim.post_trajectory_time >= 0.0) {
            return Err(Error::Scenario("simulation timing settings must be positive".into()));
        }
        if !(self.noise.pos_std >= 0.0 && self.noise.vel_std >= 0.0) {
            return Err(Error::Scenario("noise std must be non-negative".into()));
        }
        let (x, _) = self.start_pose()?;
        if x.z < sim.floor {
            return Err(Error::Scenario("start below the floor".into()));
        }
        Ok(())
    }

    pub fn target(&self) -> Result<PerchTarget> {
        PerchTarget::from_incline(Vector3::from(self.target.center), self.target.incline_deg)
    }

    /// Start position and heading.
    pub fn start_pose(&self) -> Result<(Vector3<f64>, f64)> {
        let target = self.target()?;
        let x = match self.start.position {
            Some(p) => Vector3::from(p),
            None => {
                let n = target.s3();
                let horiz = Vector3::new(n.x, n.y, 0.0);
                let out = if horiz.norm() > 1e-9 {
                    horiz.normalize()
                } else {
                    Vector3::x()
                };
                let side = Vector3::z().cross(&out);
                target.s + out * self.start.distance + Vector3::z() * self.start.height + side * self.start.lateral
            }
        };
        if !x.iter().all(|c| c.is_finite()) {
            return Err(Error::Scenario("start position not finite".into()));
        }
        let psi = match self.start.yaw {
            Some(p) => p,
            None => {
                let d = target.s - x;
                if d.x.hypot(d.y) > 1e-9 {
                    d.y.atan2(d.x)
                } else {
                    target.contact_yaw(0.0)
                }
            }
        };
        Ok((x, psi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip() {
        let s = PerchScenario::perch(60.0, 3.5);
        let text = s.to_toml_string().unwrap();
        let back = PerchScenario::from_toml_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let s = PerchScenario::from_toml_str("schema_version = 1\n[target]\nincline_deg = 30.0\n").unwrap();
        assert_eq!(s.plan, PlanParams::default());
        assert_eq!(s.target.incline_deg, 30.0);
        let (x, psi) = s.start_pose().unwrap();
        assert!((x - Vector3::new(1.5, 0.0, 1.5)).norm() < 1e-12);
        assert!((psi - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(PerchScenario::from_toml_str("schema_version = 2").is_err());
        assert!(PerchScenario::from_toml_str("schema_version = 1\nbogus = 3").is_err());
        assert!(PerchScenario::from_toml_str("schema_version = 1\n[target]\nincline_deg = 120.0").is_err());
        let e = PerchScenario::load(Path::new("/nonexistent/x.toml")).unwrap_err();
        assert!(e.to_string().contains("file not found"));
    }
}
