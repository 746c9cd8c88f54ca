//! Closed-loop simulation: rigid-body dynamics, geometric tracking control, a
//! camera with distance-dependent detection noise, and episode metrics.

mod camera;
mod control;
mod dynamics;
mod episode;

pub use camera::{detect_target, CameraModel, DetectionNoise};
pub use control::{geometric_control, ControlOutput, ControlReference};
pub use dynamics::{dynamics_step, hat, orthonormalize, vee, RigidState};
pub use episode::{
    interception_error, path_visibility, rng_stream, run_episode, visibility_metrics, ContactEvent, EpisodeLog,
    EpisodeOutcome, LogRecord, Metrics, ReplanEvent, CONTROL_NOISE_STREAM, DETECTOR_STREAM, LOG_HEADER,
};
