mod common;

use std::sync::OnceLock;

use nalgebra::Vector3;
use perchkit::flatmap::{thrust_norm, FlatState};
use perchkit::planner::{cone_eval, fov_nonlinear_eval, linearize_fov, plan, PreviousPlan};
use perchkit::scenario::PerchScenario;
use perchkit::Spline64;
use proptest::prelude::*;

fn plan_for(incline: f64, distance: f64) -> (PerchScenario, Spline64) {
    let s = PerchScenario::perch(incline, distance);
    let (x, psi) = s.start_pose().unwrap();
    let target = s.target().unwrap();
    let (traj, diag) = plan(&FlatState::hover(x, psi), &target, &s.plan, &s.vehicle, None).unwrap();
    assert!(diag.certificates.iter().all(|c| c.passed()));
    (s, traj)
}

/// Contact acceleration for a pad tilted `incline` degrees about `e₂`.
fn contact_acc(incline: f64, alpha: f64, g: f64) -> Vector3<f64> {
    let b = incline.to_radians();
    Vector3::new(alpha * b.sin(), 0.0, alpha * b.cos() - g)
}

/// Plans at 1.5 m and 3.5 m, shared across cases.
fn near_plans() -> &'static [(PerchScenario, Spline64)] {
    static PLANS: OnceLock<Vec<(PerchScenario, Spline64)>> = OnceLock::new();
    PLANS.get_or_init(|| vec![plan_for(90.0, 1.5), plan_for(90.0, 3.5)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn perch_plans_meet_endpoint_band_and_thrust(k in 0usize..4, distance in 1.0f64..4.0) {
        let incline = [0.0, 30.0, 60.0, 90.0][k];
        let (s, traj) = plan_for(incline, distance);
        let p = &s.plan;
        let tf = traj.duration();
        let want = contact_acc(incline, p.alpha, s.vehicle.gravity);
        let end = FlatState::from_spline(&traj, tf);
        prop_assert!((end.a - want).norm() < 1e-6);
        prop_assert!((end.x - Vector3::from(s.target.center)).norm() < 1e-6);

        for i in 0..15 {
            let a = FlatState::from_spline(&traj, tf - p.t_k + i as f64 * p.dt).a;
            for axis in 0..3 {
                let (lo, hi) = (want[axis].min((1.0 + p.q) * want[axis]), want[axis].max((1.0 + p.q) * want[axis]));
                prop_assert!(a[axis] >= lo - 1e-6 && a[axis] <= hi + 1e-6, "band at sample {i} axis {axis}");
            }
        }

        for w in traj.knots()[1..traj.knots().len() - 1].iter() {
            for order in 0..=4 {
                let l = traj.eval_all(w - 1e-12, order);
                let r = traj.eval_all(w + 1e-12, order);
                for (a, b) in l.iter().zip(&r) {
                    prop_assert!((a - b).abs() < 1e-5 * (1.0 + a.abs()), "order {order} jump at {w}");
                }
            }
        }

        for i in 0..=2000 {
            let tau = thrust_norm(&FlatState::from_spline(&traj, tf * i as f64 / 2000.0).a, &s.vehicle);
            prop_assert!(tau >= s.vehicle.tau_min - 1e-6 && tau <= s.vehicle.tau_max + 1e-6);
        }
    }

    #[test]
    fn linearization_is_exact_at_expansion_and_close_near_the_boundary(
        k in 0usize..2,
        u in 0.0f64..1.0,
        dx in prop::array::uniform3(-1.0f64..1.0),
        da in prop::array::uniform3(-1.0f64..1.0),
        dpsi in -1.0f64..1.0,
    ) {
        let (s, traj) = &near_plans()[k];
        let p = &s.plan;
        let target = s.target().unwrap();
        let st = FlatState::from_spline(traj, u * traj.duration());
        let at = fov_nonlinear_eval(&st.x, st.psi, &st.a, &target, p.fov_ratio, &p.camera_axis, &s.vehicle).unwrap();
        prop_assume!(at.depth > 0.0 && (at.f - at.g).abs() <= 0.25 * at.g);
        let lin = linearize_fov(&st.x, st.psi, &st.a, &target, p.fov_ratio, &p.camera_axis, &s.vehicle).unwrap();
        prop_assert_eq!(lin.eval(&st.x, st.psi, &st.a) - at.residual(), 0.0);

        let r = 1.0 / 3f64.sqrt();
        let x = st.x + Vector3::from(dx) * p.trust_pos * r;
        let a = st.a + Vector3::from(da) * p.trust_acc * r;
        let psi = st.psi + dpsi * p.trust_yaw;
        let nl = fov_nonlinear_eval(&x, psi, &a, &target, p.fov_ratio, &p.camera_axis, &s.vehicle).unwrap();
        prop_assert!((lin.eval(&x, psi, &a) - nl.residual()).abs() <= 0.05);
    }
}

#[test]
fn replans_start_where_asked_and_use_camera_rows() {
    let (s, traj) = plan_for(90.0, 3.5);
    let target = s.target().unwrap();
    let t_now = 0.3 * traj.duration();
    let start = FlatState::from_spline(&traj, t_now);
    let (next, diag) = plan(
        &start,
        &target,
        &s.plan,
        &s.vehicle,
        Some(PreviousPlan { traj: &traj, t_now }),
    )
    .unwrap();
    let first = FlatState::from_spline(&next, 0.0);
    assert!((first.x - start.x).norm() < 1e-6);
    assert!((first.v - start.v).norm() < 1e-6);
    assert!((first.a - start.a).norm() < 1e-6);
    assert!(diag.fov_points > 0);
    assert!(diag.certificates.iter().all(|c| c.passed()));
}

#[test]
fn first_plans_keep_the_target_in_front() {
    let (s, traj) = plan_for(90.0, 3.5);
    let target = s.target().unwrap();
    let st = FlatState::from_spline(&traj, 0.0);
    let axis = perchkit::planner::camera_axis_world(&st.a, st.psi, &s.plan.camera_axis, &s.vehicle).unwrap();
    assert!(cone_eval(&st.x, &axis, &target.s, s.plan.fov_ratio).depth > 0.0);
}
