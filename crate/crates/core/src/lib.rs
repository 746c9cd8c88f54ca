//! Perching trajectory planning for quadrotors.
//!
//! Minimum-snap splines over the flat outputs `{x, y, z, yaw}` are planned
//! through a primal-dual interior-point QP with perching endpoint constraints,
//! a pre-impact acceleration band and linearized camera field-of-view
//! constraints. Thrust feasibility is certified over the whole horizon with
//! Sturm sequences, stretching time until the certificate holds. A replanning
//! loop anticipates the vehicle state at trajectory-swap time, and a
//! deterministic rigid-body simulator closes the loop with a geometric
//! controller and a distance-dependent target detector.

pub mod cli;
pub mod error;
pub mod flatmap;
pub mod planner;
pub mod polyalg;
pub mod qpcore;
pub mod replanner;
pub mod scalar;
pub mod scenario;
pub mod simworld;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Polynomial64 = polyalg::Polynomial<f64>;
pub type Polynomial32 = polyalg::Polynomial<f32>;
pub type Spline64 = polyalg::Spline<f64>;
pub type Spline32 = polyalg::Spline<f32>;
pub type QpProblem64 = qpcore::QpProblem<f64>;
pub type QpProblem32 = qpcore::QpProblem<f32>;
pub type QpSolution64 = qpcore::QpSolution<f64>;
pub type QpSolution32 = qpcore::QpSolution<f32>;
