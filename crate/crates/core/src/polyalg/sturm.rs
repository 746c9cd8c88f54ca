//! Sturm chains, real-root counting on an interval, and global bound checking.

use crate::error::{Error, Result};
use crate::polyalg::poly::{Polynomial, MAX_DEGREE};
use crate::scalar::Scalar;

/// Relative threshold below which remainder coefficients are treated as zero.
pub const REMAINDER_REL_TOL: f64 = 1e-12;

/// Relative inward nudge applied to an interval endpoint that is itself a root.
pub const ENDPOINT_NUDGE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SturmSequence<T> {
    chain: Vec<Polynomial<T>>,
}

impl<T: Scalar> SturmSequence<T> {
    pub fn chain(&self) -> &[Polynomial<T>] {
        &self.chain
    }

    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    /// Number of sign changes of the chain evaluated at `t`, zeros skipped.
    pub fn sign_changes(&self, t: T) -> usize {
        let mut changes = 0;
        let mut prev: Option<bool> = None;
        for s in &self.chain {
            let v = s.eval(t);
            if v == T::zero() {
                continue;
            }
            let positive = v > T::zero();
            if prev.is_some_and(|p| p != positive) {
                changes += 1;
            }
            prev = Some(positive);
        }
        changes
    }
}

/// Builds `S0 = p`, `S1 = p'`, `S_{i+1} = -rem(S_{i-1}, S_i)` until the
/// remainder vanishes or a constant is reached.
pub fn sturm_sequence<T: Scalar>(p: &Polynomial<T>) -> Result<SturmSequence<T>> {
    build_chain(p, false)
}

/// Same chain with every member divided by its largest coefficient. Positive
/// scaling keeps every sign, and stops high-degree remainders from blowing up
/// after a near-cancelled leading term.
pub(crate) fn scaled_sturm_sequence<T: Scalar>(p: &Polynomial<T>) -> Result<SturmSequence<T>> {
    build_chain(p, true)
}

fn build_chain<T: Scalar>(p: &Polynomial<T>, normalize: bool) -> Result<SturmSequence<T>> {
    let fit = |q: Polynomial<T>| {
        if normalize {
            q.scale(T::one() / q.max_abs_coeff())
        } else {
            q
        }
    };
    let degree = p
        .degree()
        .ok_or_else(|| Error::InvalidInput("Sturm sequence of the zero polynomial".into()))?;
    if degree > MAX_DEGREE {
        return Err(Error::InvalidInput(format!(
            "polynomial degree {degree} exceeds cap {MAX_DEGREE}"
        )));
    }
    let mut chain = vec![fit(p.clone())];
    let d = p.derivative(1);
    if d.is_zero() {
        return Ok(SturmSequence { chain });
    }
    chain.push(fit(d));
    let tol = T::lit(REMAINDER_REL_TOL);
    loop {
        let n = chain.len();
        if chain[n - 1].degree() == Some(0) {
            break;
        }
        let r = chain[n - 2].rem(&chain[n - 1], tol).expect("chain members are nonzero");
        if r.is_zero() {
            break;
        }
        chain.push(fit(-&r));
    }
    Ok(SturmSequence { chain })
}

fn check_interval<T: Scalar>(t0: T, tf: T) -> Result<()> {
    if !(t0 < tf) || !t0.is_finite() || !tf.is_finite() {
        return Err(Error::InvalidInput(format!("invalid interval [{t0}, {tf}]")));
    }
    Ok(())
}

/// Number of distinct real roots of `p` strictly inside `(t0, tf)`.
///
/// An endpoint that is itself a root is moved inward by
/// `ENDPOINT_NUDGE * (tf - t0)` before the chain is evaluated.
pub fn count_roots<T: Scalar>(p: &Polynomial<T>, t0: T, tf: T) -> Result<usize> {
    check_interval(t0, tf)?;
    let seq = scaled_sturm_sequence(p)?;
    Ok(count_with(&seq, t0, tf))
}

pub(crate) fn count_with<T: Scalar>(seq: &SturmSequence<T>, t0: T, tf: T) -> usize {
    let p = &seq.chain[0];
    let nudge = T::lit(ENDPOINT_NUDGE) * (tf - t0);
    let a = if p.eval(t0) == T::zero() { t0 + nudge } else { t0 };
    let b = if p.eval(tf) == T::zero() { tf - nudge } else { tf };
    seq.sign_changes(a).saturating_sub(seq.sign_changes(b))
}

/// Global bound check: true iff `h(t) < bound` for every `t` in `[t0, tf]`.
///
/// Both endpoints of `F = h - bound` must be strictly negative and `F` must
/// have no root inside the interval. `F ≡ 0` is rejected by the endpoint test.
pub fn gbc<T: Scalar>(h: &Polynomial<T>, bound: T, t0: T, tf: T) -> Result<bool> {
    check_interval(t0, tf)?;
    let f = h.add_constant(-bound);
    if f.eval(t0) >= T::zero() || f.eval(tf) >= T::zero() {
        return Ok(false);
    }
    if f.degree() == Some(0) {
        return Ok(true);
    }
    let seq = scaled_sturm_sequence(&f)?;
    Ok(count_with(&seq, t0, tf) == 0)
}

/// Two-sided variant: `lower < h(t) < upper` on `[t0, tf]`.
pub fn gbc_band<T: Scalar>(h: &Polynomial<T>, lower: T, upper: T, t0: T, tf: T) -> Result<bool> {
    Ok(gbc(h, upper, t0, tf)? && gbc(&-h, -lower, t0, tf)?)
}
