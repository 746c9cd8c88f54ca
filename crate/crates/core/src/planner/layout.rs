use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::polyalg::{falling_factorial, Polynomial, Segment, Spline};
use crate::Spline64;

/// Flat-output axes `{x, y, z, ψ}`.
pub const AXES: usize = 4;
pub const YAW: usize = 3;

/// Decision-variable layout of a piecewise polynomial.
///
/// Variables are time-normalized coefficients `c̃ₙ = cₙ Tⁿ` of each segment
/// and axis, so a segment reads `Σ c̃ₙ (t/T)ⁿ` in local time `t ∈ [0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineLayout {
    durations: Vec<f64>,
    knots: Vec<f64>,
    degree: usize,
}

impl SplineLayout {
    pub fn new(durations: Vec<f64>, degree: usize) -> Result<Self> {
        if durations.is_empty() || durations.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidInput(format!("bad segment durations {durations:?}")));
        }
        let mut knots = vec![0.0];
        for d in &durations {
            knots.push(knots.last().unwrap() + d);
        }
        Ok(Self {
            durations,
            knots,
            degree,
        })
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn segments(&self) -> usize {
        self.durations.len()
    }

    pub fn total(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn n_coeffs(&self) -> usize {
        self.degree + 1
    }

    pub fn n_vars(&self) -> usize {
        self.segments() * AXES * self.n_coeffs()
    }

    pub fn var(&self, seg: usize, axis: usize, n: usize) -> usize {
        (seg * AXES + axis) * self.n_coeffs() + n
    }

    /// Segment and normalized local time `τ ∈ [0, 1]` of global time `t`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let last = self.segments() - 1;
        let seg = self.knots[1..=last].iter().position(|&k| t < k).unwrap_or(last);
        let tau = ((t - self.knots[seg]) / self.durations[seg]).clamp(0.0, 1.0);
        (seg, tau)
    }

    /// Adds `weight · dᵏ/dtᵏ axis(τ)` of one segment to `row`.
    pub fn add_basis(&self, row: &mut DVector<f64>, seg: usize, axis: usize, order: usize, tau: f64, weight: f64) {
        let scale = weight / self.durations[seg].powi(order as i32);
        let mut pow = 1.0;
        for n in order..=self.degree {
            row[self.var(seg, axis, n)] += scale * falling_factorial(n, order) * pow;
            pow *= tau;
        }
    }

    /// Basis row at a global time.
    pub fn add_basis_at(&self, row: &mut DVector<f64>, t: f64, axis: usize, order: usize, weight: f64) {
        let (seg, tau) = self.locate(t);
        self.add_basis(row, seg, axis, order, tau, weight);
    }

    pub fn zero_row(&self) -> DVector<f64> {
        DVector::zeros(self.n_vars())
    }

    /// Converts a solution vector into a spline in raw coefficients.
    pub fn to_spline(&self, c: &DVector<f64>) -> Result<Spline64> {
        let segments = (0..self.segments())
            .map(|seg| {
                let t = self.durations[seg];
                let axes = (0..AXES)
                    .map(|axis| {
                        let mut inv = 1.0;
                        Polynomial::new(
                            (0..=self.degree)
                                .map(|n| {
                                    let v = c[self.var(seg, axis, n)] * inv;
                                    inv /= t;
                                    v
                                })
                                .collect(),
                        )
                    })
                    .collect();
                Segment { axes, duration: t }
            })
            .collect();
        Spline::new(segments)
    }

    /// Block-diagonal cost in normalized coefficients: `½c̃ᵀQc̃` is half the
    /// integral of the squared `j`-th derivative, with per-axis weights.
    pub fn cost(&self, j: usize, weights: &[f64; AXES]) -> Result<DMatrix<f64>> {
        if self.degree < j {
            return Err(Error::InvalidInput(format!(
                "degree {} below cost order {j}",
                self.degree
            )));
        }
        let nc = self.n_coeffs();
        let mut q = DMatrix::zeros(self.n_vars(), self.n_vars());
        for seg in 0..self.segments() {
            let t_scale = self.durations[seg].powi(1 - 2 * j as i32);
            for (axis, w) in weights.iter().enumerate() {
                let base = self.var(seg, axis, 0);
                for m in j..nc {
                    for n in j..nc {
                        q[(base + m, base + n)] = w * t_scale * falling_factorial(m, j) * falling_factorial(n, j)
                            / (m + n + 1 - 2 * j) as f64;
                    }
                }
            }
        }
        Ok(q)
    }
}

/// `Q` in raw coefficients with `cᵀQc = Σ ∫ ‖dʲP/dtʲ‖² dt` over all segments
/// and `axes` axes; variables ordered segment-major, then axis, then power.
pub fn build_min_deriv_cost(durations: &[f64], degree: usize, j: usize, axes: usize) -> Result<DMatrix<f64>> {
    if degree < j {
        return Err(Error::InvalidInput(format!("degree {degree} below cost order {j}")));
    }
    if durations.is_empty() || durations.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidInput("durations must be positive".into()));
    }
    let nc = degree + 1;
    let nv = durations.len() * axes * nc;
    let mut q = DMatrix::zeros(nv, nv);
    for (seg, &t) in durations.iter().enumerate() {
        for axis in 0..axes {
            let base = (seg * axes + axis) * nc;
            for m in j..nc {
                for n in j..nc {
                    let p = (m + n + 1 - 2 * j) as i32;
                    q[(base + m, base + n)] = falling_factorial(m, j) * falling_factorial(n, j) * t.powi(p) / p as f64;
                }
            }
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_examples() {
        let q = build_min_deriv_cost(&[1.0], 3, 4, 1);
        assert!(q.is_err());
        let q = build_min_deriv_cost(&[1.0], 4, 4, 1).unwrap();
        let c = DVector::from_column_slice(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(((c.transpose() * &q * &c)[(0, 0)] - 576.0).abs() < 1e-9);
        // cubic part is free
        let c = DVector::from_column_slice(&[1.0, -2.0, 3.0, 4.0, 0.0]);
        assert_eq!((c.transpose() * &q * &c)[(0, 0)], 0.0);
    }

    #[test]
    fn normalized_cost_matches_raw() {
        let l = SplineLayout::new(vec![0.7, 1.9], 9).unwrap();
        let qn = l.cost(4, &[1.0; AXES]).unwrap();
        let raw = build_min_deriv_cost(l.durations(), 9, 4, AXES).unwrap();
        let c = DVector::from_fn(l.n_vars(), |i, _| ((i * 7919) % 13) as f64 - 6.0);
        let raw_c = DVector::from_fn(l.n_vars(), |i, _| {
            let n = i % l.n_coeffs();
            let seg = i / (AXES * l.n_coeffs());
            c[i] / l.durations()[seg].powi(n as i32)
        });
        let a = (c.transpose() * &qn * &c)[(0, 0)];
        let b = (raw_c.transpose() * &raw * &raw_c)[(0, 0)];
        assert!((a - b).abs() <= 1e-9 * b.abs(), "{a} {b}");
    }

    #[test]
    fn basis_rows_evaluate_the_spline() {
        let l = SplineLayout::new(vec![0.5, 1.5], 9).unwrap();
        let c = DVector::from_fn(l.n_vars(), |i, _| ((i * 31) % 11) as f64 * 0.1 - 0.5);
        let s = l.to_spline(&c).unwrap();
        for &t in &[0.0, 0.3, 0.5, 1.2, 2.0] {
            for order in 0..5 {
                let mut row = l.zero_row();
                l.add_basis_at(&mut row, t, 2, order, 1.0);
                let v = row.dot(&c);
                let want = s.eval(2, t.min(2.0), order);
                assert!(
                    (v - want).abs() < 1e-9 * (1.0 + want.abs()),
                    "t={t} k={order}: {v} {want}"
                );
            }
        }
    }
}
