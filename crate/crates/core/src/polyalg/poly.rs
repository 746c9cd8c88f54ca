use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Largest degree any polynomial in this crate is expected to reach.
pub const MAX_DEGREE: usize = 64;

/// Dense univariate polynomial, coefficients stored in ascending powers.
///
/// The coefficient vector is kept canonical: trailing (highest-power) zeros are
/// trimmed, and the zero polynomial has an empty coefficient list.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Polynomial<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> Polynomial<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| *c == T::zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `t`.
    pub fn t() -> Self {
        Self::new(vec![T::zero(), T::one()])
    }

    pub fn from_f64(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| T::lit(c)).collect())
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Coefficient of `t^n`, zero past the degree.
    pub fn coeff(&self, n: usize) -> T {
        self.coeffs.get(n).copied().unwrap_or_else(T::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> T {
        self.coeffs.last().copied().unwrap_or_else(T::zero)
    }

    pub fn max_abs_coeff(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |m, c| m.max(c.abs()))
    }

    /// Horner evaluation.
    pub fn eval(&self, t: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * t + c)
    }

    /// `order`-th formal derivative.
    pub fn derivative(&self, order: usize) -> Self {
        if order == 0 {
            return self.clone();
        }
        if self.coeffs.len() <= order {
            return Self::zero();
        }
        let coeffs = (order..self.coeffs.len())
            .map(|n| self.coeffs[n] * T::lit(falling_factorial(n, order)))
            .collect();
        Self::new(coeffs)
    }

    /// Value of the `order`-th derivative at `t` without materializing it.
    pub fn eval_derivative(&self, t: T, order: usize) -> T {
        if self.coeffs.len() <= order {
            return T::zero();
        }
        (order..self.coeffs.len()).rev().fold(T::zero(), |acc, n| {
            acc * t + self.coeffs[n] * T::lit(falling_factorial(n, order))
        })
    }

    pub fn scale(&self, k: T) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    /// Coefficient convolution.
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i) - other.coeff(i)).collect())
    }

    pub fn add_constant(&self, c: T) -> Self {
        let mut coeffs = self.coeffs.clone();
        if coeffs.is_empty() {
            coeffs.push(c);
        } else {
            coeffs[0] += c;
        }
        Self::new(coeffs)
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    /// `p(k·t)`, e.g. to move a segment polynomial onto normalized time.
    pub fn scale_argument(&self, k: T) -> Self {
        let mut f = T::one();
        Self::new(
            self.coeffs
                .iter()
                .map(|&c| {
                    let v = c * f;
                    f *= k;
                    v
                })
                .collect(),
        )
    }

    /// Zero every coefficient whose magnitude is below `threshold`.
    pub fn trimmed(&self, threshold: T) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .map(|&c| if c.abs() < threshold { T::zero() } else { c })
                .collect(),
        )
    }

    /// Remainder of polynomial long division `self / divisor`.
    ///
    /// Coefficients of the running remainder below `rel_tol * max|self|` are
    /// dropped after every elimination step. Returns `None` for a zero divisor.
    pub fn rem(&self, divisor: &Self, rel_tol: T) -> Option<Self> {
        let d_deg = divisor.degree()?;
        let lead = divisor.leading();
        let threshold = rel_tol * self.max_abs_coeff().max(divisor.max_abs_coeff());
        let mut r = self.coeffs.clone();
        while r.len() > d_deg && !r.is_empty() {
            let shift = r.len() - 1 - d_deg;
            let q = *r.last().unwrap() / lead;
            for (k, &dc) in divisor.coeffs.iter().enumerate() {
                r[k + shift] -= q * dc;
            }
            r.pop(); // eliminated exactly by construction
            for c in r.iter_mut() {
                if c.abs() < threshold {
                    *c = T::zero();
                }
            }
            while r.last().is_some_and(|c| *c == T::zero()) {
                r.pop();
            }
        }
        Some(Self::new(r))
    }
}

/// `n! / (n-k)!` as a float.
pub(crate) fn falling_factorial(n: usize, k: usize) -> f64 {
    ((n + 1 - k)..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Squared Euclidean norm of a polynomial vector, `sum_i p_i^2`.
pub fn vec_norm_sq<T: Scalar>(components: &[Polynomial<T>]) -> Polynomial<T> {
    components
        .iter()
        .fold(Polynomial::zero(), |acc, p| acc.add(&p.square()))
}

impl<T: Scalar> Add for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn add(self, rhs: Self) -> Polynomial<T> {
        Polynomial::add(self, rhs)
    }
}

impl<T: Scalar> Sub for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn sub(self, rhs: Self) -> Polynomial<T> {
        Polynomial::sub(self, rhs)
    }
}

impl<T: Scalar> Mul for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn mul(self, rhs: Self) -> Polynomial<T> {
        Polynomial::mul(self, rhs)
    }
}

impl<T: Scalar> Neg for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        self.scale(-T::one())
    }
}

impl<T: fmt::Debug> fmt::Debug for Polynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial{:?}", self.coeffs)
    }
}
