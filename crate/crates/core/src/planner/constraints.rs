use nalgebra::{DMatrix, DVector, Vector3};

use super::layout::{SplineLayout, AXES, YAW};
use super::params::PlanParams;
use super::target::PerchTarget;
use crate::flatmap::FlatState;

/// Linear rows `lower ≤ row·c ≤ upper`; equalities have `lower == upper`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintRows {
    pub rows: Vec<DVector<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ConstraintRows {
    pub fn push_eq(&mut self, row: DVector<f64>, value: f64) {
        self.push_range(row, value, value);
    }

    pub fn push_range(&mut self, row: DVector<f64>, lower: f64, upper: f64) {
        self.rows.push(row);
        self.lower.push(lower);
        self.upper.push(upper);
    }

    pub fn extend(&mut self, other: ConstraintRows) {
        self.rows.extend(other.rows);
        self.lower.extend(other.lower);
        self.upper.extend(other.upper);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), n);
        for (i, r) in self.rows.iter().enumerate() {
            m.set_row(i, &r.transpose());
        }
        m
    }

    pub fn lower_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.lower)
    }

    pub fn upper_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.upper)
    }

    /// Largest bound violation at `c` (zero when all rows hold).
    pub fn violation(&self, c: &DVector<f64>) -> f64 {
        self.rows
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(r, (&lo, &hi))| {
                let v = r.dot(c);
                (lo - v).max(v - hi).max(0.0)
            })
            .fold(0.0, f64::max)
    }
}

/// Terminal conditions other than the contact acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointSpec {
    pub x: Vector3<f64>,
    /// `(direction, value)` pairs constraining `v(t_f)·direction`.
    pub velocity: Vec<(Vector3<f64>, f64)>,
    pub psi: f64,
}

impl EndpointSpec {
    /// Contact at the pad center with the configured normal/tangential speeds.
    /// Whenever either speed is set, the lateral component along `s₂` is zeroed.
    pub fn perch(target: &PerchTarget, params: &PlanParams, psi: f64) -> Self {
        let mut velocity = Vec::new();
        if let Some(v) = params.v_s1 {
            velocity.push((target.s1(), v));
        }
        if let Some(v) = params.v_s3 {
            velocity.push((target.s3(), v));
        }
        if !velocity.is_empty() {
            velocity.push((target.s2(), 0.0));
        }
        Self {
            x: target.s,
            velocity,
            psi,
        }
    }
}

const START_POS_ORDERS: usize = 5;
const START_YAW_ORDERS: usize = 3;
const CONTINUITY_ORDERS: usize = 5;

/// Start state (position through snap, yaw through yaw acceleration), C⁴
/// continuity at interior knots, and the terminal position, velocity and
/// heading (with zero yaw rate and acceleration).
pub fn build_boundary_constraints(start: &FlatState, end: &EndpointSpec, layout: &SplineLayout) -> ConstraintRows {
    let mut out = ConstraintRows::default();
    for order in 0..START_POS_ORDERS {
        let d = start.position_derivative(order);
        for axis in 0..3 {
            let mut row = layout.zero_row();
            layout.add_basis(&mut row, 0, axis, order, 0.0, 1.0);
            out.push_eq(row, d[axis]);
        }
    }
    for order in 0..START_YAW_ORDERS {
        let mut row = layout.zero_row();
        layout.add_basis(&mut row, 0, YAW, order, 0.0, 1.0);
        out.push_eq(row, start.yaw_derivative(order));
    }
    for seg in 0..layout.segments() - 1 {
        for axis in 0..AXES {
            for order in 0..CONTINUITY_ORDERS {
                let mut row = layout.zero_row();
                layout.add_basis(&mut row, seg, axis, order, 1.0, 1.0);
                layout.add_basis(&mut row, seg + 1, axis, order, 0.0, -1.0);
                out.push_eq(row, 0.0);
            }
        }
    }
    let last = layout.segments() - 1;
    for axis in 0..3 {
        let mut row = layout.zero_row();
        layout.add_basis(&mut row, last, axis, 0, 1.0, 1.0);
        out.push_eq(row, end.x[axis]);
    }
    for (dir, value) in &end.velocity {
        let mut row = layout.zero_row();
        for axis in 0..3 {
            layout.add_basis(&mut row, last, axis, 1, 1.0, dir[axis]);
        }
        out.push_eq(row, *value);
    }
    for (order, value) in [(0, end.psi), (1, 0.0), (2, 0.0)] {
        let mut row = layout.zero_row();
        layout.add_basis(&mut row, last, YAW, order, 1.0, 1.0);
        out.push_eq(row, value);
    }
    out
}

/// Sample times of the pre-impact band, `t_f − t_k + i·dt`, clipped at zero.
pub fn band_times(total: f64, params: &PlanParams) -> Vec<f64> {
    (0..params.band_samples())
        .map(|i| total - params.t_k + i as f64 * params.dt)
        .filter(|&t| t >= 0.0)
        .collect()
}

/// Contact acceleration equality and the componentwise pre-impact band
/// between `α s₃ − g e₃` and `(1 + q)(α s₃ − g e₃)`.
pub fn build_perch_constraints(
    target: &PerchTarget,
    params: &PlanParams,
    gravity: f64,
    layout: &SplineLayout,
) -> (ConstraintRows, ConstraintRows) {
    let acc = target.endpoint_acceleration(params.alpha, gravity);
    let last = layout.segments() - 1;
    let mut eq = ConstraintRows::default();
    for axis in 0..3 {
        let mut row = layout.zero_row();
        layout.add_basis(&mut row, last, axis, 2, 1.0, 1.0);
        eq.push_eq(row, acc[axis]);
    }
    let mut band = ConstraintRows::default();
    for t in band_times(layout.total(), params) {
        for axis in 0..3 {
            let a = acc[axis];
            let b = (1.0 + params.q) * a;
            let mut row = layout.zero_row();
            layout.add_basis_at(&mut row, t, axis, 2, 1.0);
            band.push_range(row, a.min(b), a.max(b));
        }
    }
    (eq, band)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_counts() {
        let l = SplineLayout::new(vec![1.0, 0.15], 9).unwrap();
        let t = PerchTarget::from_incline(Vector3::zeros(), 90.0).unwrap();
        let p = PlanParams::default();
        let end = EndpointSpec::perch(&t, &p, t.contact_yaw(0.0));
        let rows = build_boundary_constraints(&FlatState::default(), &end, &l);
        // 15 + 3 start, 20 continuity, 3 position + 3 velocity + 3 yaw end
        assert_eq!(rows.len(), 18 + 20 + 9);
        let (eq, band) = build_perch_constraints(&t, &p, 9.81, &l);
        assert_eq!(eq.len(), 3);
        assert_eq!(band.len(), 45);
        assert_eq!(band_times(l.total(), &p).len(), 15);
        assert_eq!(eq.upper, vec![4.0, 0.0, -9.81]);
    }

    #[test]
    fn zero_tolerance_collapses_band() {
        let l = SplineLayout::new(vec![1.0, 0.15], 9).unwrap();
        let t = PerchTarget::from_incline(Vector3::zeros(), 60.0).unwrap();
        let p = PlanParams {
            q: 0.0,
            ..PlanParams::default()
        };
        let (_, band) = build_perch_constraints(&t, &p, 9.81, &l);
        assert!(band.lower.iter().zip(&band.upper).all(|(a, b)| a == b));
    }

    #[test]
    fn endpoint_velocity_vector() {
        let t = PerchTarget::from_incline(Vector3::zeros(), 90.0).unwrap();
        let p = PlanParams {
            v_s1: Some(0.3),
            v_s3: Some(-2.0),
            ..PlanParams::default()
        };
        let end = EndpointSpec::perch(&t, &p, 0.0);
        let v = t.s1() * 0.3 + t.s3() * -2.0;
        for (dir, value) in &end.velocity {
            assert!((dir.dot(&v) - value).abs() < 1e-12);
        }
        let free = PlanParams {
            v_s1: None,
            v_s3: None,
            ..PlanParams::default()
        };
        assert!(EndpointSpec::perch(&t, &free, 0.0).velocity.is_empty());
    }
}
