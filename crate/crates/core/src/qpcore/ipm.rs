//! Mehrotra predictor-corrector on the equality-reduced problem.
//!
//! Equalities (including two-sided rows with `y == z`) are eliminated through
//! an SVD of the row-equilibrated equality block: `c = c_p + Z u` with `c_p`
//! the least-squares solution and `Z` a null-space basis. Dependent rows drop
//! out of the rank; inconsistent ones are reported as infeasible. Every
//! enabled inequality side becomes a row of `Ĝ u − s = ĥ`, `s ≥ 0`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{QpProblem, QpSolution, QpStatus};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub max_iter: usize,
    /// Convergence tolerance on the scaled residuals and on `sᵀλ`.
    pub tol: f64,
    /// Added to the (reduced) cost Hessian.
    pub q_reg: f64,
    pub step_fraction: f64,
    /// Most negative eigenvalue of Q accepted, relative to `max(1, max|Q|)`.
    pub psd_tol: f64,
    /// Infeasibility: primal residual stuck above `infeas_tol` for this many iterations.
    pub stall_iters: usize,
    pub infeas_tol: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-9,
            q_reg: 1e-9,
            step_fraction: 0.995,
            psd_tol: 1e-8,
            stall_iters: 10,
            infeas_tol: 1e-6,
        }
    }
}

pub fn solve_qp<T: Scalar>(problem: &QpProblem<T>) -> Result<QpSolution<T>> {
    solve_qp_with(problem, &QpSettings::default())
}

#[derive(Clone, Copy)]
enum EqOrigin {
    A(usize),
    G(usize),
}

#[derive(Clone, Copy)]
struct IneqSide {
    row: usize,
    upper: bool,
    /// Equilibration factor applied to the row.
    scale: f64,
}

/// Range-space factors of the equality block for least-squares solves with `Aᵀ`.
struct EqSpace<T: Scalar> {
    u: Vec<DVector<T>>,
    v: Vec<DVector<T>>,
    sigma: Vec<T>,
}

impl<T: Scalar> EqSpace<T> {
    /// Minimum-norm least-squares `ν` of `Aᵀν = r`.
    fn solve_transposed(&self, r: &DVector<T>, m: usize) -> DVector<T> {
        let mut nu = DVector::zeros(m);
        for ((u, v), &s) in self.u.iter().zip(&self.v).zip(&self.sigma) {
            nu.axpy(v.dot(r) / s, u, T::one());
        }
        nu
    }
}

fn inf_norm<T: Scalar>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

pub fn solve_qp_with<T: Scalar>(problem: &QpProblem<T>, settings: &QpSettings) -> Result<QpSolution<T>> {
    problem.validate()?;
    let n = problem.n();
    let k = problem.n_ineq();
    let eps = T::default_epsilon();
    let lit = T::lit;
    let tol = lit(settings.tol).max(eps * lit(100.0));

    let qmax = problem.q.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let asym = (&problem.q - problem.q.transpose())
        .iter()
        .fold(T::zero(), |m, x| m.max(x.abs()));
    if asym > lit(1e-10).max(eps * lit(10.0)) * qmax.max(T::one()) {
        return Err(Error::InvalidInput(format!("Q is not symmetric (asymmetry {asym})")));
    }
    let q = (&problem.q + problem.q.transpose()) * lit(0.5);
    if n > 0 {
        let min_eig = SymmetricEigen::new(q.clone())
            .eigenvalues
            .iter()
            .fold(T::infinity(), |m, &e| m.min(e));
        if min_eig < -lit(settings.psd_tol) * qmax.max(T::one()) {
            return Err(Error::NotPsd(min_eig.as_f64()));
        }
    }

    // Sort rows into equalities and one-sided inequalities.
    let mut eq_rows: Vec<(DVector<T>, T, EqOrigin)> = Vec::new();
    for j in 0..problem.n_eq() {
        eq_rows.push((problem.a.row(j).transpose(), problem.b[j], EqOrigin::A(j)));
    }
    let mut sides: Vec<IneqSide> = Vec::new();
    let mut g_rows: Vec<(DVector<T>, T)> = Vec::new();
    let mut infeasible = false;
    for i in 0..k {
        let (lo, hi) = (problem.y[i], problem.z[i]);
        let row = problem.g.row(i).transpose();
        if lo.is_finite() && hi.is_finite() && lo == hi {
            eq_rows.push((row, lo, EqOrigin::G(i)));
            continue;
        }
        let norm = row.norm();
        for (upper, bound) in [(false, lo), (true, hi)] {
            if !bound.is_finite() {
                continue;
            }
            if norm == T::zero() {
                // 0 ≥ y or 0 ≤ z
                let ok = if upper { bound >= T::zero() } else { bound <= T::zero() };
                infeasible |= !ok;
                continue;
            }
            let scale = T::one() / norm;
            let sign = if upper { -T::one() } else { T::one() };
            g_rows.push((&row * (sign * scale), sign * bound * scale));
            sides.push(IneqSide {
                row: i,
                upper,
                scale: scale.as_f64(),
            });
        }
    }

    let me = eq_rows.len();
    let mut ae = DMatrix::zeros(me, n);
    let mut be = DVector::zeros(me);
    let mut eq_scale = vec![T::one(); me];
    for (j, (row, rhs, _)) in eq_rows.iter().enumerate() {
        let norm = row.norm();
        if norm == T::zero() {
            infeasible |= rhs.abs() > tol;
            continue;
        }
        eq_scale[j] = T::one() / norm;
        ae.set_row(j, &(row * eq_scale[j]).transpose());
        be[j] = *rhs * eq_scale[j];
    }

    // Particular solution and null-space basis.
    let (cp, zb, eq_space) = if me == 0 {
        (
            DVector::zeros(n),
            DMatrix::identity(n, n),
            EqSpace {
                u: vec![],
                v: vec![],
                sigma: vec![],
            },
        )
    } else {
        let rows = me.max(n);
        let mut m = DMatrix::zeros(rows, n);
        m.view_mut((0, 0), (me, n)).copy_from(&ae);
        let svd = m.svd(true, true);
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested Vᵀ");
        let smax = svd.singular_values.iter().fold(T::zero(), |m, &s| m.max(s));
        // Machine-precision rank: sampled derivative rows in the monomial basis
        // have genuine singular values far below any fixed relative cutoff.
        let rank_tol = smax * eps * lit(10.0 * rows as f64);
        let mut space = EqSpace {
            u: vec![],
            v: vec![],
            sigma: vec![],
        };
        let mut null = Vec::new();
        for (i, &s) in svd.singular_values.iter().enumerate() {
            let v = vt.row(i).transpose();
            if s > rank_tol {
                space.u.push(u.column(i).rows(0, me).into_owned());
                space.v.push(v);
                space.sigma.push(s);
            } else {
                null.push(v);
            }
        }
        let mut cp = DVector::zeros(n);
        for ((ui, vi), &s) in space.u.iter().zip(&space.v).zip(&space.sigma) {
            cp.axpy(ui.dot(&be) / s, vi, T::one());
        }
        let resid = inf_norm(&(&ae * &cp - &be));
        infeasible |= resid > lit(1e-8).max(eps * lit(1e3)) * (T::one() + inf_norm(&be));
        let zb = if null.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&null)
        };
        (cp, zb, space)
    };

    let mi = g_rows.len();
    let mut gh = DMatrix::zeros(mi, n);
    let mut h = DVector::zeros(mi);
    for (i, (row, rhs)) in g_rows.iter().enumerate() {
        gh.set_row(i, &row.transpose());
        h[i] = *rhs;
    }

    let dim = zb.ncols();
    let mut hess = zb.transpose() * &q * &zb;
    for i in 0..dim {
        hess[(i, i)] += lit(settings.q_reg);
    }
    let grad = zb.transpose() * (&q * &cp + &problem.p);
    let gu = &gh * &zb;
    let hu = &h - &gh * &cp;

    let mut u = DVector::zeros(dim);
    let mut s = DVector::zeros(mi);
    let mut lam = DVector::zeros(mi);
    let mut iterations = 0;
    let status = if infeasible {
        QpStatus::Infeasible
    } else if mi == 0 {
        iterations = 1;
        if dim > 0 {
            u = -factor(&hess).solve(&grad);
        }
        QpStatus::Optimal
    } else {
        let run = interior_point(&hess, &grad, &gu, &hu, settings, tol);
        u = run.u;
        s = run.s;
        lam = run.lam;
        iterations = run.iterations;
        run.status
    };

    let c = &cp + &zb * &u;

    let mut lambda_lower = DVector::zeros(k);
    let mut lambda_upper = DVector::zeros(k);
    let mut slack_lower = DVector::from_element(k, T::infinity());
    let mut slack_upper = DVector::from_element(k, T::infinity());
    for (i, side) in sides.iter().enumerate() {
        let sc = lit(side.scale);
        if side.upper {
            lambda_upper[side.row] = lam[i] * sc;
            slack_upper[side.row] = s[i] / sc;
        } else {
            lambda_lower[side.row] = lam[i] * sc;
            slack_lower[side.row] = s[i] / sc;
        }
    }

    let mut lambda_eq = DVector::zeros(problem.n_eq());
    if me > 0 {
        let r = &q * &c + &problem.p - gh.transpose() * &lam;
        let nu = eq_space.solve_transposed(&r, me);
        for (j, (_, _, origin)) in eq_rows.iter().enumerate() {
            let v = nu[j] * eq_scale[j];
            match *origin {
                EqOrigin::A(a) => lambda_eq[a] = v,
                EqOrigin::G(g) => {
                    lambda_lower[g] = v.max(T::zero());
                    lambda_upper[g] = (-v).max(T::zero());
                    slack_lower[g] = T::zero();
                    slack_upper[g] = T::zero();
                }
            }
        }
    }

    Ok(QpSolution {
        c,
        lambda_eq,
        lambda_lower,
        lambda_upper,
        slack_lower,
        slack_upper,
        status,
        iterations,
    })
}

/// Cholesky of an SPD matrix, escalating a diagonal shift until it succeeds.
fn factor<T: Scalar>(m: &DMatrix<T>) -> nalgebra::Cholesky<T, nalgebra::Dyn> {
    if let Some(ch) = m.clone().cholesky() {
        return ch;
    }
    let dmax = m.diagonal().iter().fold(T::one(), |a, &d| a.max(d.abs()));
    let mut shift = dmax * T::lit(1e-12);
    loop {
        let mut shifted = m.clone();
        for i in 0..m.nrows() {
            shifted[(i, i)] += shift;
        }
        if let Some(ch) = shifted.cholesky() {
            return ch;
        }
        shift *= T::lit(100.0);
    }
}

struct IpmRun<T: Scalar> {
    u: DVector<T>,
    s: DVector<T>,
    lam: DVector<T>,
    status: QpStatus,
    iterations: usize,
}

fn max_step<T: Scalar>(x: &DVector<T>, dx: &DVector<T>) -> T {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < T::zero())
        .fold(T::infinity(), |a, (&v, &d)| a.min(-v / d))
}

/// min ½uᵀHu + gᵀu  s.t.  Gu − s = h, s ≥ 0.
fn interior_point<T: Scalar>(
    hess: &DMatrix<T>,
    grad: &DVector<T>,
    g: &DMatrix<T>,
    h: &DVector<T>,
    settings: &QpSettings,
    tol: T,
) -> IpmRun<T> {
    let lit = T::lit;
    let m = g.nrows();
    let mf = lit(m as f64);
    let gt = g.transpose();
    let mut u = DVector::zeros(hess.nrows());
    let mut s = (g * &u - h).map(|v| v.max(T::one()));
    let mut lam = DVector::from_element(m, T::one());
    let grad_scale = T::one() + inf_norm(grad);
    let h_scale = T::one() + inf_norm(h);
    let infeas_tol = lit(settings.infeas_tol);
    let mut ri_hist: Vec<T> = Vec::with_capacity(settings.max_iter);

    for iter in 0..settings.max_iter {
        let rd = hess * &u + grad - &gt * &lam;
        let ri = g * &u - &s - h;
        let gap = s.dot(&lam);
        let mu = gap / mf;
        let (rdn, rin) = (inf_norm(&rd), inf_norm(&ri));
        if rdn <= tol * grad_scale && rin <= tol * h_scale && gap <= tol {
            return IpmRun {
                u,
                s,
                lam,
                status: QpStatus::Optimal,
                iterations: iter,
            };
        }
        let lam_max = inf_norm(&lam);
        let stalled = iter >= settings.stall_iters
            && rin > infeas_tol * h_scale
            && mu > infeas_tol
            && rin > lit(0.9) * ri_hist[iter - settings.stall_iters];
        if stalled || lam_max > lit(1e12) {
            return IpmRun {
                u,
                s,
                lam,
                status: QpStatus::Infeasible,
                iterations: iter,
            };
        }
        ri_hist.push(rin);

        let d = lam.component_div(&s);
        let mut k = hess.clone();
        let gd = DMatrix::from_fn(m, g.ncols(), |i, j| g[(i, j)] * d[i]);
        k += &gt * gd;
        let chol = factor(&k);
        let solve = |rc: &DVector<T>| {
            let w = (rc + lam.component_mul(&ri)).component_div(&s);
            let du = chol.solve(&(-&rd - &gt * w));
            let ds = g * &du + &ri;
            let dl = -(rc + lam.component_mul(&ds)).component_div(&s);
            (du, ds, dl)
        };

        let rc_aff = s.component_mul(&lam);
        let (_, ds_a, dl_a) = solve(&rc_aff);
        let a_aff = max_step(&s, &ds_a).min(max_step(&lam, &dl_a)).min(T::one());
        let mu_aff = (&s + &ds_a * a_aff).dot(&(&lam + &dl_a * a_aff)) / mf;
        let sigma = (mu_aff / mu).powi(3).min(T::one());
        let rc = rc_aff + ds_a.component_mul(&dl_a) - DVector::from_element(m, sigma * mu);
        let (du, ds, dl) = solve(&rc);
        let alpha = (lit(settings.step_fraction) * max_step(&s, &ds).min(max_step(&lam, &dl))).min(T::one());
        u += du * alpha;
        s += ds * alpha;
        lam += dl * alpha;
    }
    IpmRun {
        u,
        s,
        lam,
        status: QpStatus::MaxIter,
        iterations: settings.max_iter,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qpcore::kkt_residuals;

    fn mat(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    fn vecd(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn equality_examples() {
        let p = QpProblem::new(mat(1, 1, &[2.0])).with_equalities(mat(1, 1, &[1.0]), vecd(&[1.0]));
        let s = solve_qp(&p).unwrap();
        assert!(s.is_optimal());
        assert!((s.c[0] - 1.0).abs() < 1e-8);

        let p = QpProblem::new(DMatrix::identity(2, 2) * 2.0).with_equalities(mat(1, 2, &[1.0, 1.0]), vecd(&[2.0]));
        let s = solve_qp(&p).unwrap();
        assert!((s.c[0] - 1.0).abs() < 1e-8 && (s.c[1] - 1.0).abs() < 1e-8);
        let r = kkt_residuals(&p, &s).unwrap();
        assert!(r.max() < 1e-8, "{r:?}");
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let inf = f64::INFINITY;
        let p = QpProblem::new(mat(1, 1, &[2.0])).with_inequalities(
            mat(2, 1, &[1.0, -1.0]),
            vecd(&[1.0, 0.0]),
            vecd(&[inf, inf]),
        );
        let s = solve_qp(&p).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
    }

    #[test]
    fn active_bound() {
        // min (c - 3)² s.t. c ≤ 1
        let p = QpProblem::new(mat(1, 1, &[2.0]))
            .with_linear(vecd(&[-6.0]))
            .with_inequalities(mat(1, 1, &[1.0]), vecd(&[f64::NEG_INFINITY]), vecd(&[1.0]));
        let s = solve_qp(&p).unwrap();
        assert!(s.is_optimal());
        assert!((s.c[0] - 1.0).abs() < 1e-8);
        assert!((s.lambda2()[0] + 4.0).abs() < 1e-6);
        let r = kkt_residuals(&p, &s).unwrap();
        assert!(r.max() < 1e-8, "{r:?}");
    }

    #[test]
    fn dependent_and_inconsistent_equalities() {
        let a = mat(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let p = QpProblem::new(DMatrix::identity(2, 2)).with_equalities(a.clone(), vecd(&[1.0, 2.0]));
        let s = solve_qp(&p).unwrap();
        assert!(s.is_optimal());
        assert!((s.c[0] - 0.5).abs() < 1e-8);
        let r = kkt_residuals(&p, &s).unwrap();
        assert!(r.max() < 1e-8, "{r:?}");
        let p = QpProblem::new(DMatrix::identity(2, 2)).with_equalities(a, vecd(&[1.0, 3.0]));
        assert_eq!(solve_qp(&p).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn two_sided_equal_row_becomes_equality() {
        let p = QpProblem::new(DMatrix::identity(2, 2)).with_inequalities(
            mat(1, 2, &[1.0, 0.0]),
            vecd(&[2.0]),
            vecd(&[2.0]),
        );
        let s = solve_qp(&p).unwrap();
        assert!((s.c[0] - 2.0).abs() < 1e-9);
        assert!((s.lambda2()[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_indefinite_cost() {
        let p = QpProblem::new(mat(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        assert!(matches!(solve_qp(&p), Err(Error::NotPsd(_))));
    }

    #[test]
    fn deterministic_bits() {
        let p = QpProblem::new(mat(2, 2, &[2.0, 0.5, 0.5, 1.0]))
            .with_linear(vecd(&[1.0, -1.0]))
            .with_inequalities(mat(1, 2, &[1.0, 1.0]), vecd(&[0.3]), vecd(&[0.7]));
        let a = solve_qp(&p).unwrap();
        let b = solve_qp(&p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_precision() {
        let p = QpProblem::<f32>::new(DMatrix::identity(2, 2) * 2.0).with_equalities(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_element(1, 2.0),
        );
        let s = solve_qp(&p).unwrap();
        assert!((s.c[0] - 1.0).abs() < 1e-4);
    }
}
