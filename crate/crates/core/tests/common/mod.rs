//! Independent oracles shared by the integration tests. None of these call
//! into the code under test beyond plain data types.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, Vector3};
use perchkit::flatmap::{
    actuator_bound_poly, omega_from_flat, roll_pitch, rotation_from_flat, thrust_norm, BoundKind, FlatState,
    VehicleParams,
};
use perchkit::polyalg::{Polynomial, Segment, Spline};
use perchkit::Spline64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// Distinct real roots in `(t0, tf]` seen as sign changes on a uniform grid.
pub fn sign_change_roots(coeffs: &[f64], t0: f64, tf: f64, samples: usize) -> usize {
    let mut count = 0;
    let mut prev = horner(coeffs, t0).signum();
    for i in 1..=samples {
        let t = t0 + (tf - t0) * i as f64 / samples as f64;
        let v = horner(coeffs, t);
        if v == 0.0 {
            continue;
        }
        let s = v.signum();
        if prev != 0.0 && s != prev {
            count += 1;
        }
        prev = s;
    }
    count
}

/// Roots of a polynomial from the eigenvalues of its companion matrix.
pub fn companion_roots(coeffs: &[f64]) -> Vec<(f64, f64)> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -coeffs[i] / lead;
    }
    m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
}

/// True when the sampled oracle is trustworthy: roots pairwise separated,
/// clear of the interval ends, and unambiguous about being real.
pub fn roots_well_separated(coeffs: &[f64], t0: f64, tf: f64, sep: f64) -> bool {
    let roots = companion_roots(coeffs);
    for (i, a) in roots.iter().enumerate() {
        if a.1.abs() > 1e-12 && a.1.abs() < sep {
            return false;
        }
        if a.1.abs() <= 1e-12 && ((a.0 - t0).abs() < sep || (a.0 - tf).abs() < sep) {
            return false;
        }
        for b in &roots[i + 1..] {
            if ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() < sep {
                return false;
            }
        }
    }
    true
}

/// Maximum on `[t0, tf]` from a dense grid, refined around every local
/// maximum of the samples.
pub fn grid_max(coeffs: &[f64], t0: f64, tf: f64, samples: usize) -> f64 {
    let h = (tf - t0) / samples as f64;
    let vals: Vec<f64> = (0..=samples).map(|i| horner(coeffs, t0 + h * i as f64)).collect();
    let mut best = f64::NEG_INFINITY;
    for i in 0..=samples {
        let left = i == 0 || vals[i] >= vals[i - 1];
        let right = i == samples || vals[i] >= vals[i + 1];
        best = best.max(vals[i]);
        if !(left && right) {
            continue;
        }
        let c = t0 + h * i as f64;
        let (lo, hi) = ((c - h).max(t0), (c + h).min(tf));
        for j in 0..=400 {
            best = best.max(horner(coeffs, lo + (hi - lo) * j as f64 / 400.0));
        }
    }
    best
}

pub fn random_coeffs<R: Rng>(rng: &mut R, degree: usize, scale: f64) -> Vec<f64> {
    let mut c: Vec<f64> = (0..=degree).map(|_| rng.random_range(-scale..scale)).collect();
    if c[degree].abs() < 0.05 * scale {
        c[degree] = 0.05 * scale * if c[degree] < 0.0 { -1.0 } else { 1.0 };
    }
    c
}

pub fn random_spd<R: Rng>(rng: &mut R, n: usize, shift: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.transpose() * &m + DMatrix::identity(n, n) * shift
}

/// Solves the saddle system of an equality-constrained QP directly.
pub fn kkt_dense(q: &DMatrix<f64>, p: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (n, m) = (q.nrows(), a.nrows());
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(q);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(a);
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-p));
    rhs.rows_mut(n, m).copy_from(b);
    let sol = k.lu().solve(&rhs).expect("nonsingular KKT matrix");
    sol.rows(0, n).into_owned()
}

/// Box-constrained QP by enumerating which bound, if any, each variable
/// sits on. The optimum of a strictly convex problem is the best feasible
/// candidate among the stationary points of these restrictions.
pub fn box_qp_brute(q: &DMatrix<f64>, p: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
    let n = q.nrows();
    let mut best = f64::INFINITY;
    let combos = 3usize.pow(n as u32);
    for code in 0..combos {
        let mut c = DVector::zeros(n);
        let mut free = Vec::new();
        let mut k = code;
        for i in 0..n {
            match k % 3 {
                0 => free.push(i),
                1 => c[i] = lo[i],
                _ => c[i] = hi[i],
            }
            k /= 3;
        }
        if !free.is_empty() {
            let f = free.len();
            let qff = DMatrix::from_fn(f, f, |r, s| q[(free[r], free[s])]);
            let rhs = DVector::from_fn(f, |r, _| {
                let i = free[r];
                -p[i]
                    - (0..n)
                        .filter(|j| !free.contains(j))
                        .map(|j| q[(i, j)] * c[j])
                        .sum::<f64>()
            });
            let Some(cf) = qff.cholesky().map(|ch| ch.solve(&rhs)) else {
                continue;
            };
            for (r, &i) in free.iter().enumerate() {
                c[i] = cf[r];
            }
        }
        if (0..n).any(|i| c[i] < lo[i] - 1e-12 || c[i] > hi[i] + 1e-12) {
            continue;
        }
        best = best.min(0.5 * c.dot(&(q * &c)) + p.dot(&c));
    }
    best
}

/// Optimal objective of a strictly convex QP with equalities `A c = b` and
/// two-sided rows `y ≤ G c ≤ z`, by enumerating the side each row is held
/// at. The optimum solves the equality problem on its active set, so the
/// best feasible candidate over all active sets is optimal.
pub fn qp_brute(
    q: &DMatrix<f64>,
    p: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    g: &DMatrix<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
) -> f64 {
    let (n, k) = (q.nrows(), g.nrows());
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(k as u32) {
        let mut rows: Vec<DVector<f64>> = (0..a.nrows()).map(|i| a.row(i).transpose()).collect();
        let mut rhs: Vec<f64> = b.iter().copied().collect();
        let mut c = code;
        let mut skip = false;
        for i in 0..k {
            let side = c % 3;
            c /= 3;
            let bound = match side {
                0 => continue,
                1 => y[i],
                _ => z[i],
            };
            if !bound.is_finite() {
                skip = true;
                break;
            }
            rows.push(g.row(i).transpose());
            rhs.push(bound);
        }
        if skip || rows.len() > n {
            continue;
        }
        let am = if rows.is_empty() {
            DMatrix::zeros(0, n)
        } else {
            DMatrix::from_columns(&rows).transpose()
        };
        if rows.len() > 0 && am.clone().svd(false, false).singular_values.min() < 1e-9 {
            continue;
        }
        let x = kkt_dense(q, p, &am, &DVector::from_vec(rhs));
        let gx = g * &x;
        if (0..k).any(|i| gx[i] < y[i] - 1e-9 || gx[i] > z[i] + 1e-9) {
            continue;
        }
        best = best.min(0.5 * x.dot(&(q * &x)) + p.dot(&x));
    }
    best
}

/// One-segment spline around hover with small random wiggles.
pub fn random_trajectory<R: Rng>(rng: &mut R, duration: f64, amp: f64) -> Spline64 {
    let base = [0.0, 0.0, 2.0, 0.0];
    let axes = (0..4)
        .map(|axis| {
            let mut c = vec![base[axis]];
            for k in 1..=7 {
                let s = amp / duration.powi(k as i32) / (k * k) as f64;
                c.push(rng.random_range(-s..s));
            }
            Polynomial::new(c)
        })
        .collect();
    Spline::new(vec![Segment { axes, duration }]).unwrap()
}

/// Thrust rate from its definition `τ = m‖a + g e₃‖`.
pub fn thrust_rate(s: &FlatState, v: &VehicleParams) -> f64 {
    let f = s.a + Vector3::z() * v.gravity;
    v.mass * f.dot(&s.j) / f.norm()
}

fn omega_dot_fd(traj: &Spline64, t: f64, v: &VehicleParams) -> Vector3<f64> {
    let h = 1e-5;
    let w = |t| omega_from_flat(&FlatState::from_spline(traj, t), v).unwrap();
    (w(t + h) - w(t - h)) / (2.0 * h)
}

/// Trajectory whose thrust stays above `τ_min` and roll within π/4.
pub fn feasible_trajectory(seed: u64, amp: f64, v: &VehicleParams) -> Option<Spline64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traj = random_trajectory(&mut rng, 1.0, amp);
    for i in 0..=1000 {
        let s = FlatState::from_spline(&traj, i as f64 / 1000.0);
        let r = rotation_from_flat(&s.a, s.psi, v).ok()?;
        if thrust_norm(&s.a, v) < v.tau_min || roll_pitch(&r, s.psi).0.abs() > std::f64::consts::FRAC_PI_4 {
            return None;
        }
    }
    Some(traj)
}

/// Smallest `(bound − true) / (1 + true)` over all kinds and samples.
pub fn bound_domination(traj: &Spline64, v: &VehicleParams, samples: usize) -> f64 {
    let rate = actuator_bound_poly(traj, 0, BoundKind::ThrustRateSq, v).unwrap();
    let omega = actuator_bound_poly(traj, 0, BoundKind::OmegaSq, v).unwrap();
    let omega_dot = actuator_bound_poly(traj, 0, BoundKind::OmegaDotSq, v).unwrap();
    let moment = actuator_bound_poly(traj, 0, BoundKind::Moment, v).unwrap();
    let d = traj.duration();
    let mut worst = f64::INFINITY;
    let mut check = |bound: f64, truth: f64| worst = worst.min((bound - truth) / (1.0 + truth) + 1e-6);
    for i in 0..samples {
        let t = d * (i as f64 + 0.5) / samples as f64;
        let s = FlatState::from_spline(traj, t);
        let w = omega_from_flat(&s, v).unwrap();
        let wd = omega_dot_fd(traj, t, v);
        let m = v.inertia * wd + w.cross(&(v.inertia * w));
        check(rate.scalar().unwrap().eval(t), thrust_rate(&s, v).powi(2));
        check(omega.scalar().unwrap().eval(t), w.norm_squared());
        check(omega_dot.scalar().unwrap().eval(t), wd.norm_squared());
        for (k, b) in moment.per_axis().unwrap().iter().enumerate() {
            check(b.eval(t), m[k] * m[k]);
        }
    }
    worst
}
