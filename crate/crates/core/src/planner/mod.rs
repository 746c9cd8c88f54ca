//! Perching trajectory optimization: min-derivative cost, boundary and
//! continuity equalities, contact acceleration and pre-impact band,
//! linearized camera-cone rows, and thrust certification with time stretching.

mod constraints;
mod fov;
mod layout;
mod params;
mod solve;
mod target;

pub use constraints::{band_times, build_boundary_constraints, build_perch_constraints, ConstraintRows, EndpointSpec};
pub use fov::{
    build_fov_constraints, camera_axis_world, cone_eval, fov_nonlinear_eval, linearize_fov, ConeRow, FovEval,
    FovLinearization, FovRows, SkippedPoint, FOV_GRAD_STEP,
};
pub use layout::{build_min_deriv_cost, SplineLayout, AXES, YAW};
pub use params::{free_or_value, PlanParams};
pub use solve::{
    certify, certify_with_margin, plan, pre_impact_times, relax_fov_and_replan, FovStage, PlanDiagnostics,
    PreviousPlan, SegmentCertificate, StrictCertificate,
};
pub use target::PerchTarget;
