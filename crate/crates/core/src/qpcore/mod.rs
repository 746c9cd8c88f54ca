//! Convex quadratic programs
//!
//! ```txt
//!   min  ½ cᵀQc + pᵀc
//!   s.t. A c = b
//!        y ≤ G c ≤ z
//! ```
//!
//! solved by a primal-dual interior-point method, with KKT residual reporting.

mod ipm;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use ipm::{solve_qp, solve_qp_with, QpSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<T: Scalar> {
    pub q: DMatrix<T>,
    /// Linear cost term; zero for the pure quadratic form.
    pub p: DVector<T>,
    pub a: DMatrix<T>,
    pub b: DVector<T>,
    pub g: DMatrix<T>,
    /// Lower bounds of `G c`; `-inf` disables a side.
    pub y: DVector<T>,
    /// Upper bounds of `G c`; `+inf` disables a side.
    pub z: DVector<T>,
}

impl<T: Scalar> QpProblem<T> {
    /// Unconstrained problem with cost matrix `q`.
    pub fn new(q: DMatrix<T>) -> Self {
        let n = q.ncols();
        Self {
            q,
            p: DVector::zeros(n),
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            g: DMatrix::zeros(0, n),
            y: DVector::zeros(0),
            z: DVector::zeros(0),
        }
    }

    pub fn with_linear(mut self, p: DVector<T>) -> Self {
        self.p = p;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<T>, b: DVector<T>) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    pub fn with_inequalities(mut self, g: DMatrix<T>, y: DVector<T>, z: DVector<T>) -> Self {
        self.g = g;
        self.y = y;
        self.z = z;
        self
    }

    pub fn n(&self) -> usize {
        self.q.ncols()
    }

    pub fn n_eq(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_ineq(&self) -> usize {
        self.g.nrows()
    }

    pub fn objective(&self, c: &DVector<T>) -> T {
        (c.transpose() * &self.q * c)[(0, 0)] * T::lit(0.5) + self.p.dot(c)
    }

    /// Shape checks and the `y ≤ z` invariant. Definiteness is checked by the solver.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let dim = |msg: String| Err(Error::Dimension(msg));
        if self.q.nrows() != n {
            return dim(format!("Q is {}x{}", self.q.nrows(), n));
        }
        if self.p.len() != n {
            return dim(format!("p has length {}, expected {n}", self.p.len()));
        }
        if self.a.ncols() != n || self.b.len() != self.a.nrows() {
            return dim(format!(
                "A is {}x{}, b has length {}",
                self.a.nrows(),
                self.a.ncols(),
                self.b.len()
            ));
        }
        let k = self.g.nrows();
        if self.g.ncols() != n || self.y.len() != k || self.z.len() != k {
            return dim(format!(
                "G is {}x{}, y/z have lengths {}/{}",
                k,
                self.g.ncols(),
                self.y.len(),
                self.z.len()
            ));
        }
        for i in 0..k {
            if !(self.y[i] <= self.z[i]) {
                return Err(Error::InvalidInput(format!(
                    "inequality row {i}: lower {} exceeds upper {}",
                    self.y[i], self.z[i]
                )));
            }
        }
        let finite = |m: &DMatrix<T>| m.iter().all(|v| v.is_finite());
        if !finite(&self.q) || !finite(&self.a) || !finite(&self.g) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        if !self.p.iter().chain(self.b.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite vector entry".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<T: Scalar> {
    pub c: DVector<T>,
    /// Equality multipliers (`λ₁`).
    pub lambda_eq: DVector<T>,
    /// Multipliers of `G c ≥ y` and `G c ≤ z`; zero for disabled sides.
    pub lambda_lower: DVector<T>,
    pub lambda_upper: DVector<T>,
    /// `G c − y` and `z − G c` as tracked by the solver; `inf` for disabled sides.
    pub slack_lower: DVector<T>,
    pub slack_upper: DVector<T>,
    pub status: QpStatus,
    pub iterations: usize,
}

impl<T: Scalar> QpSolution<T> {
    /// Signed inequality multiplier `λ₂ = λ_lower − λ_upper`.
    pub fn lambda2(&self) -> DVector<T> {
        &self.lambda_lower - &self.lambda_upper
    }

    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals<T> {
    pub stationarity: T,
    pub primal_eq: T,
    pub primal_ineq: T,
    pub complementarity: T,
}

impl<T: Scalar> KktResiduals<T> {
    pub fn max(&self) -> T {
        self.stationarity
            .max(self.primal_eq)
            .max(self.primal_ineq)
            .max(self.complementarity.abs())
    }
}

fn inf_norm<T: Scalar>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Infinity norms of the stationarity, equality and inequality residuals, and
/// `λ₂ᵀs` summed over the enabled inequality sides.
pub fn kkt_residuals<T: Scalar>(problem: &QpProblem<T>, sol: &QpSolution<T>) -> Result<KktResiduals<T>> {
    problem.validate()?;
    let n = problem.n();
    let k = problem.n_ineq();
    if sol.c.len() != n
        || sol.lambda_eq.len() != problem.n_eq()
        || [&sol.lambda_lower, &sol.lambda_upper, &sol.slack_lower, &sol.slack_upper]
            .iter()
            .any(|v| v.len() != k)
    {
        return Err(Error::Dimension("solution does not match problem".into()));
    }
    let c = &sol.c;
    let stat =
        &problem.q * c + &problem.p - problem.a.transpose() * &sol.lambda_eq - problem.g.transpose() * sol.lambda2();
    let eq = &problem.a * c - &problem.b;
    let gc = &problem.g * c;
    let mut primal_ineq = T::zero();
    let mut comp = T::zero();
    for i in 0..k {
        if problem.y[i].is_finite() {
            primal_ineq = primal_ineq.max((gc[i] - problem.y[i] - sol.slack_lower[i]).abs());
            comp += sol.lambda_lower[i] * sol.slack_lower[i];
        }
        if problem.z[i].is_finite() {
            primal_ineq = primal_ineq.max((problem.z[i] - gc[i] - sol.slack_upper[i]).abs());
            comp += sol.lambda_upper[i] * sol.slack_upper[i];
        }
    }
    Ok(KktResiduals {
        stationarity: inf_norm(&stat),
        primal_eq: inf_norm(&eq),
        primal_ineq,
        complementarity: comp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residuals_at_known_points() {
        let prob = QpProblem::new(DMatrix::from_element(1, 1, 2.0));
        let sol = QpSolution {
            c: DVector::from_element(1, 0.0),
            lambda_eq: DVector::zeros(0),
            lambda_lower: DVector::zeros(0),
            lambda_upper: DVector::zeros(0),
            slack_lower: DVector::zeros(0),
            slack_upper: DVector::zeros(0),
            status: QpStatus::Optimal,
            iterations: 0,
        };
        let r = kkt_residuals(&prob, &sol).unwrap();
        assert_eq!(r.max(), 0.0);

        // min c² s.t. c = 1, perturbed to 1.1
        let prob = prob.with_equalities(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0));
        let mut sol = solve_qp(&prob).unwrap();
        sol.c[0] += 0.1;
        let r = kkt_residuals(&prob, &sol).unwrap();
        assert!((r.primal_eq - 0.1f64).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let prob =
            QpProblem::new(DMatrix::<f64>::identity(2, 2)).with_equalities(DMatrix::zeros(1, 3), DVector::zeros(1));
        assert!(matches!(prob.validate(), Err(Error::Dimension(_))));
        let prob = QpProblem::new(DMatrix::<f64>::identity(2, 2)).with_inequalities(
            DMatrix::identity(1, 2),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 0.0),
        );
        assert!(prob.validate().is_err());
    }
}
