//! Polynomial and piecewise-spline algebra, Sturm sequences, interval root
//! counting and global bound checking.

mod poly;
mod spline;
mod sturm;

#[allow(unused_imports)]
pub(crate) use poly::falling_factorial;
pub use poly::{vec_norm_sq, Polynomial, MAX_DEGREE};
pub use spline::{Segment, Spline};
pub use sturm::{count_roots, gbc, gbc_band, sturm_sequence, SturmSequence, ENDPOINT_NUDGE, REMAINDER_REL_TOL};
