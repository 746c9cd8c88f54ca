use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyalg::poly::Polynomial;
use crate::scalar::Scalar;

/// One spline piece: a polynomial per axis in local time `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Segment<T> {
    pub axes: Vec<Polynomial<T>>,
    pub duration: T,
}

/// Piecewise-polynomial curve over `[0, total_duration]`.
///
/// Segment `i` is evaluated at `t - knots[i]`. Evaluation past the last knot
/// extrapolates the final segment; before zero it extrapolates the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Spline<T> {
    segments: Vec<Segment<T>>,
    knots: Vec<T>,
}

impl<T: Scalar> Spline<T> {
    pub fn new(segments: Vec<Segment<T>>) -> Result<Self> {
        let dim = segments
            .first()
            .ok_or_else(|| Error::InvalidInput("spline needs at least one segment".into()))?
            .axes
            .len();
        let mut knots = Vec::with_capacity(segments.len() + 1);
        let mut t = T::zero();
        knots.push(t);
        for (i, s) in segments.iter().enumerate() {
            if !(s.duration > T::zero()) {
                return Err(Error::InvalidInput(format!(
                    "segment {i} has non-positive duration {}",
                    s.duration
                )));
            }
            if s.axes.len() != dim {
                return Err(Error::Dimension(format!(
                    "segment {i} has {} axes, expected {dim}",
                    s.axes.len()
                )));
            }
            t += s.duration;
            knots.push(t);
        }
        Ok(Self { segments, knots })
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    /// Cumulative knot times `t_0 = 0, t_1, ..., t_f`.
    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn dim(&self) -> usize {
        self.segments[0].axes.len()
    }

    pub fn duration(&self) -> T {
        *self.knots.last().unwrap()
    }

    pub fn durations(&self) -> Vec<T> {
        self.segments.iter().map(|s| s.duration).collect()
    }

    /// Segment index and local time for global time `t`.
    pub fn locate(&self, t: T) -> (usize, T) {
        let last = self.segments.len() - 1;
        let idx = self.knots[1..=last].iter().position(|&k| t < k).unwrap_or(last);
        (idx, t - self.knots[idx])
    }

    /// `order`-th derivative of one axis at global time `t`.
    pub fn eval(&self, axis: usize, t: T, order: usize) -> T {
        let (i, local) = self.locate(t);
        self.segments[i].axes[axis].eval_derivative(local, order)
    }

    /// `order`-th derivative of all axes at `t`.
    pub fn eval_all(&self, t: T, order: usize) -> Vec<T> {
        let (i, local) = self.locate(t);
        self.segments[i]
            .axes
            .iter()
            .map(|p| p.eval_derivative(local, order))
            .collect()
    }

    /// Largest jump across interior knots in derivatives `0..=max_order`.
    pub fn continuity_defect(&self, max_order: usize) -> T {
        let mut worst = T::zero();
        for i in 0..self.segments.len().saturating_sub(1) {
            let left = &self.segments[i];
            let right = &self.segments[i + 1];
            for (pl, pr) in left.axes.iter().zip(&right.axes) {
                for k in 0..=max_order {
                    let a = pl.eval_derivative(left.duration, k);
                    let b = pr.eval_derivative(T::zero(), k);
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    /// Spline with every segment duration multiplied by `factor`, keeping the
    /// same geometric path (coefficients rescaled in time).
    pub fn time_scaled(&self, factor: T) -> Result<Self> {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment {
                axes: s
                    .axes
                    .iter()
                    .map(|p| {
                        let mut scale = T::one();
                        let coeffs = p
                            .coeffs()
                            .iter()
                            .map(|&c| {
                                let v = c * scale;
                                scale /= factor;
                                v
                            })
                            .collect();
                        Polynomial::new(coeffs)
                    })
                    .collect(),
                duration: s.duration * factor,
            })
            .collect();
        Self::new(segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(axes: &[&[f64]], d: f64) -> Segment<f64> {
        Segment {
            axes: axes.iter().map(|c| Polynomial::from_f64(c)).collect(),
            duration: d,
        }
    }

    #[test]
    fn locate_and_eval() {
        let s = Spline::new(vec![seg(&[&[0.0, 1.0]], 1.0), seg(&[&[1.0, 2.0]], 2.0)]).unwrap();
        assert_eq!(s.knots(), &[0.0, 1.0, 3.0]);
        assert_eq!(s.locate(0.5), (0, 0.5));
        assert_eq!(s.locate(1.0), (1, 0.0));
        assert_eq!(s.locate(3.5), (1, 2.5));
        assert_eq!(s.eval(0, 2.0, 0), 3.0);
        assert_eq!(s.eval(0, 2.0, 1), 2.0);
        assert_eq!(s.continuity_defect(0), 0.0);
        assert_eq!(s.continuity_defect(1), 1.0);
    }

    #[test]
    fn rejects_bad_durations() {
        assert!(Spline::new(vec![seg(&[&[1.0]], 0.0)]).is_err());
        assert!(Spline::<f64>::new(vec![]).is_err());
        assert!(Spline::new(vec![seg(&[&[1.0]], 1.0), seg(&[&[1.0], &[2.0]], 1.0)]).is_err());
    }

    #[test]
    fn time_scaling_preserves_path() {
        let s = Spline::new(vec![seg(&[&[1.0, 2.0, 3.0]], 2.0)]).unwrap();
        let slow = s.time_scaled(2.0).unwrap();
        assert!((slow.eval(0, 2.0, 0) - s.eval(0, 1.0, 0)).abs() < 1e-12);
        assert!((slow.eval(0, 2.0, 1) - 0.5 * s.eval(0, 1.0, 1)).abs() < 1e-12);
        assert_eq!(slow.duration(), 4.0);
    }
}
