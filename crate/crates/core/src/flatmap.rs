//! Differential-flatness maps from the flat outputs `{x, y, z, ψ}` to thrust,
//! attitude and body rates, plus polynomial upper bounds on actuator effort.

use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyalg::vec_norm_sq;
use crate::{Polynomial64, Spline64};

pub const GRAVITY: f64 = 9.81;

/// Below this norm the thrust direction or heading is considered singular.
pub const SINGULAR_EPS: f64 = 1e-6;

/// Time step of the central difference used for the commanded angular acceleration.
pub const OMEGA_DOT_STEP: f64 = 1e-4;

// |x| <= ABS_QUAD * x^2 + ABS_CONST
const ABS_QUAD: f64 = 0.1;
const ABS_CONST: f64 = 2.5;

/// Limits used when the appendix-style bounds are certified (strict mode).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActuatorLimits {
    /// N/s
    pub thrust_rate: f64,
    /// rad/s
    pub omega: f64,
    /// rad/s²
    pub omega_dot: f64,
    /// N·m per body axis
    pub moment: [f64; 3],
}

impl Default for ActuatorLimits {
    fn default() -> Self {
        Self {
            thrust_rate: 400.0,
            omega: 60.0,
            omega_dot: 2000.0,
            moment: [10.0, 10.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub tau_min: f64,
    pub tau_max: f64,
    pub gravity: f64,
    /// Diagonals of the controller gain matrices.
    pub k_x: Vector3<f64>,
    pub k_v: Vector3<f64>,
    pub k_r: Vector3<f64>,
    pub k_omega: Vector3<f64>,
    pub limits: ActuatorLimits,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.005, 0.005, 0.009)),
            tau_min: 0.5,
            tau_max: 25.0,
            gravity: GRAVITY,
            k_x: Vector3::repeat(6.0),
            k_v: Vector3::repeat(4.0),
            k_r: Vector3::repeat(3.0),
            k_omega: Vector3::repeat(0.3),
            limits: ActuatorLimits::default(),
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(format!("vehicle: {msg}")));
        if !(self.mass > 0.0) {
            return bad("mass must be positive");
        }
        if !(self.tau_min > 0.0 && self.tau_min < self.tau_max) {
            return bad("need 0 < tau_min < tau_max");
        }
        if !(self.gravity > 0.0) {
            return bad("gravity must be positive");
        }
        if !self.is_inertia_diagonal() || self.inertia.diagonal().iter().any(|&d| !(d > 0.0)) {
            return bad("inertia must be diagonal and positive");
        }
        for (name, k) in [
            ("k_x", &self.k_x),
            ("k_v", &self.k_v),
            ("k_r", &self.k_r),
            ("k_omega", &self.k_omega),
        ] {
            if k.iter().any(|&g| !(g > 0.0)) {
                return bad(&format!("{name} diagonal must be positive"));
            }
        }
        Ok(())
    }

    pub fn is_inertia_diagonal(&self) -> bool {
        let j = &self.inertia;
        (0..3).all(|r| (0..3).all(|c| r == c || j[(r, c)] == 0.0))
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// Flat outputs and their derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlatState {
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
    pub a: Vector3<f64>,
    pub j: Vector3<f64>,
    pub snap: Vector3<f64>,
    pub psi: f64,
    pub psi_dot: f64,
    pub psi_ddot: f64,
}

impl FlatState {
    pub fn hover(x: Vector3<f64>, psi: f64) -> Self {
        Self {
            x,
            psi,
            ..Self::default()
        }
    }

    /// Samples a 4-axis `{x, y, z, ψ}` spline at `t`.
    pub fn from_spline(traj: &Spline64, t: f64) -> Self {
        let (i, local) = traj.locate(t);
        let axes = &traj.segments()[i].axes;
        let pos = |order: usize| {
            Vector3::new(
                axes[0].eval_derivative(local, order),
                axes[1].eval_derivative(local, order),
                axes[2].eval_derivative(local, order),
            )
        };
        Self {
            x: pos(0),
            v: pos(1),
            a: pos(2),
            j: pos(3),
            snap: pos(4),
            psi: axes[3].eval_derivative(local, 0),
            psi_dot: axes[3].eval_derivative(local, 1),
            psi_ddot: axes[3].eval_derivative(local, 2),
        }
    }

    /// Position derivative of `order` 0..=4.
    pub fn position_derivative(&self, order: usize) -> Vector3<f64> {
        match order {
            0 => self.x,
            1 => self.v,
            2 => self.a,
            3 => self.j,
            4 => self.snap,
            _ => Vector3::zeros(),
        }
    }

    /// Yaw derivative of `order` 0..=2.
    pub fn yaw_derivative(&self, order: usize) -> f64 {
        match order {
            0 => self.psi,
            1 => self.psi_dot,
            2 => self.psi_ddot,
            _ => 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.v, self.a, self.j, self.snap]
            .iter()
            .all(|v| v.iter().all(|c| c.is_finite()))
            && self.psi.is_finite()
            && self.psi_dot.is_finite()
            && self.psi_ddot.is_finite()
    }
}

fn specific_thrust(a: &Vector3<f64>, params: &VehicleParams) -> Vector3<f64> {
    a + Vector3::z() * params.gravity
}

/// `m‖a + g e₃‖`
pub fn thrust_norm(a: &Vector3<f64>, params: &VehicleParams) -> f64 {
    params.mass * specific_thrust(a, params).norm()
}

/// Body thrust axis required to realize acceleration `a`.
pub fn b3_axis(a: &Vector3<f64>, params: &VehicleParams) -> Result<Vector3<f64>> {
    let f = specific_thrust(a, params);
    let n = f.norm();
    if n <= SINGULAR_EPS {
        return Err(Error::Singular("free fall: a + g e3 vanishes".into()));
    }
    Ok(f / n)
}

/// `[b₁ b₂ b₃]` from a thrust axis and a heading.
pub fn rotation_from_thrust_dir(b3: &Vector3<f64>, psi: f64) -> Result<Matrix3<f64>> {
    let b2_des = Vector3::new(-psi.sin(), psi.cos(), 0.0);
    let c = b2_des.cross(b3);
    let n = c.norm();
    if n <= SINGULAR_EPS {
        return Err(Error::Singular("desired heading axis parallel to thrust axis".into()));
    }
    let b1 = c / n;
    let b2 = b3.cross(&b1);
    Ok(Matrix3::from_columns(&[b1, b2, *b3]))
}

pub fn rotation_from_flat(a: &Vector3<f64>, psi: f64, params: &VehicleParams) -> Result<Matrix3<f64>> {
    rotation_from_thrust_dir(&b3_axis(a, params)?, psi)
}

/// Roll and pitch of `r = Rz(ψ) Ry(θ) Rx(φ)` for a known yaw.
pub fn roll_pitch(r: &Matrix3<f64>, psi: f64) -> (f64, f64) {
    let (s, c) = psi.sin_cos();
    // rows 0 and 2 of Rz(-psi) * r, plus the (1, 1) and (1, 2) entries
    let m00 = c * r[(0, 0)] + s * r[(1, 0)];
    let m11 = -s * r[(0, 1)] + c * r[(1, 1)];
    let m12 = -s * r[(0, 2)] + c * r[(1, 2)];
    let m20 = r[(2, 0)];
    ((-m12).atan2(m11), (-m20).atan2(m00))
}

/// Body angular velocity along the flat trajectory.
pub fn omega_from_flat(state: &FlatState, params: &VehicleParams) -> Result<Vector3<f64>> {
    let tau = thrust_norm(&state.a, params);
    if !(tau > 0.0) {
        return Err(Error::Singular("zero thrust".into()));
    }
    let r = rotation_from_flat(&state.a, state.psi, params)?;
    let b1 = r.column(0);
    let b2 = r.column(1);
    let k = params.mass / tau;
    let w1 = -k * b2.dot(&state.j);
    let w2 = k * b1.dot(&state.j);
    let (phi, theta) = roll_pitch(&r, state.psi);
    let cphi = phi.cos();
    if cphi.abs() <= SINGULAR_EPS {
        return Err(Error::Singular("roll at ±90°".into()));
    }
    let w3 = theta.cos() / cphi * state.psi_dot - w2 * phi.tan();
    Ok(Vector3::new(w1, w2, w3))
}

/// Attitude and rate feed-forward at one trajectory instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCommand {
    pub flat: FlatState,
    pub r: Matrix3<f64>,
    pub omega: Vector3<f64>,
    pub omega_dot: Vector3<f64>,
}

pub fn reference_command(traj: &Spline64, t: f64, params: &VehicleParams) -> Result<ReferenceCommand> {
    let tf = traj.duration();
    let t = t.clamp(0.0, tf);
    let flat = FlatState::from_spline(traj, t);
    let r = rotation_from_flat(&flat.a, flat.psi, params)?;
    let omega = omega_from_flat(&flat, params)?;
    let lo = (t - OMEGA_DOT_STEP).max(0.0);
    let hi = (t + OMEGA_DOT_STEP).min(tf);
    let omega_dot = if hi > lo {
        let w_lo = omega_from_flat(&FlatState::from_spline(traj, lo), params)?;
        let w_hi = omega_from_flat(&FlatState::from_spline(traj, hi), params)?;
        (w_hi - w_lo) / (hi - lo)
    } else {
        Vector3::zeros()
    };
    Ok(ReferenceCommand {
        flat,
        r,
        omega,
        omega_dot,
    })
}

fn segment_axes(traj: &Spline64, segment: usize) -> Result<&[Polynomial64]> {
    let seg = traj.segments().get(segment).ok_or_else(|| {
        Error::InvalidInput(format!(
            "segment {segment} out of range ({} segments)",
            traj.segments().len()
        ))
    })?;
    if seg.axes.len() < 4 {
        return Err(Error::Dimension(format!(
            "expected 4 flat-output axes, got {}",
            seg.axes.len()
        )));
    }
    Ok(&seg.axes)
}

fn position_derivative_polys(axes: &[Polynomial64], order: usize) -> [Polynomial64; 3] {
    [
        axes[0].derivative(order),
        axes[1].derivative(order),
        axes[2].derivative(order),
    ]
}

/// `‖m ẍ + m g e₃‖²` on the segment's local time.
pub fn thrust_sq_poly(traj: &Spline64, segment: usize, params: &VehicleParams) -> Result<Polynomial64> {
    let axes = segment_axes(traj, segment)?;
    let mut acc = position_derivative_polys(axes, 2);
    acc[2] = acc[2].add_constant(params.gravity);
    Ok(vec_norm_sq(&acc).scale(params.mass * params.mass))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    ThrustRateSq,
    OmegaSq,
    OmegaDotSq,
    Moment,
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thrust_rate_sq" => Ok(Self::ThrustRateSq),
            "omega_sq" => Ok(Self::OmegaSq),
            "omega_dot_sq" => Ok(Self::OmegaDotSq),
            "moment" => Ok(Self::Moment),
            other => Err(Error::InvalidInput(format!("unknown bound kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActuatorBound {
    Scalar(Polynomial64),
    /// Bounds on the squared moment about each body axis.
    PerAxis([Polynomial64; 3]),
}

impl ActuatorBound {
    pub fn scalar(&self) -> Option<&Polynomial64> {
        match self {
            Self::Scalar(p) => Some(p),
            Self::PerAxis(_) => None,
        }
    }

    pub fn per_axis(&self) -> Option<&[Polynomial64; 3]> {
        match self {
            Self::Scalar(_) => None,
            Self::PerAxis(p) => Some(p),
        }
    }
}

/// Building blocks shared by the bounds, all in local segment time.
struct BoundTerms {
    /// (m / tau_min)^2 ‖jerk‖²
    kj: Polynomial64,
    /// ‖snap‖²
    snap_sq: Polynomial64,
    /// ψ̇²
    p: Polynomial64,
    /// ψ̈²
    p2: Polynomial64,
    /// ‖jerk‖²
    jerk_sq: Polynomial64,
    k2: f64,
}

impl BoundTerms {
    fn new(axes: &[Polynomial64], params: &VehicleParams) -> Self {
        let k = params.mass / params.tau_min;
        let jerk_sq = vec_norm_sq(&position_derivative_polys(axes, 3));
        Self {
            kj: jerk_sq.scale(k * k),
            snap_sq: vec_norm_sq(&position_derivative_polys(axes, 4)),
            p: axes[3].derivative(1).square(),
            p2: axes[3].derivative(2).square(),
            jerk_sq,
            k2: k * k,
        }
    }

    /// Bound on ω₃².
    fn w3(&self) -> Polynomial64 {
        let surrogate = self.p.mul(&self.kj).scale(8.0 * ABS_QUAD).add_constant(ABS_CONST);
        self.p.scale(2.0).add(&self.kj).add(&surrogate)
    }

    /// Bound on ω₁² + ω₂².
    fn w12(&self) -> &Polynomial64 {
        &self.kj
    }

    /// Bound on ω̇₁² + ω̇₂².
    fn d12(&self, w3: &Polynomial64) -> Polynomial64 {
        let u = self.snap_sq.scale(self.k2);
        let v = self.kj.square().scale(4.0);
        let w = self.kj.mul(w3);
        u.add(&v).add(&w).scale(3.0)
    }

    /// Bound on ω̇₃².
    fn d3(&self, w3: &Polynomial64, d12: &Polynomial64) -> Polynomial64 {
        // φ̇² ≤ 2(k²‖j‖² + ψ̇²)
        let phi_dot = self.kj.add(&self.p).scale(2.0);
        let t1 = w3.mul(&phi_dot);
        let t2 = self.p2.scale(2.0);
        let t3 = self.p.scale(2.0).mul(&self.kj.scale(2.0).add(w3));
        let t5 = self.kj.mul(&phi_dot);
        t1.add(&t2).add(&t3).add(d12).add(&t5).scale(5.0)
    }
}

/// Polynomial upper bound of the requested actuator quantity on one segment.
///
/// Valid while thrust stays at or above `tau_min` and `|roll| ≤ π/4`. The
/// moment kind bounds `M_i²` per body axis.
pub fn actuator_bound_poly(
    traj: &Spline64,
    segment: usize,
    kind: BoundKind,
    params: &VehicleParams,
) -> Result<ActuatorBound> {
    let axes = segment_axes(traj, segment)?;
    let terms = BoundTerms::new(axes, params);
    let bound = match kind {
        BoundKind::ThrustRateSq => ActuatorBound::Scalar(terms.jerk_sq.scale(params.mass * params.mass)),
        BoundKind::OmegaSq => ActuatorBound::Scalar(terms.w12().add(&terms.w3())),
        BoundKind::OmegaDotSq => {
            let w3 = terms.w3();
            let d12 = terms.d12(&w3);
            ActuatorBound::Scalar(d12.add(&terms.d3(&w3, &d12)))
        }
        BoundKind::Moment => {
            let w3 = terms.w3();
            let d12 = terms.d12(&w3);
            let d3 = terms.d3(&w3, &d12);
            let g = gyro_terms(&terms, &w3, params)?;
            let jd = params.inertia.diagonal();
            let rate = [&d12, &d12, &d3];
            ActuatorBound::PerAxis(std::array::from_fn(|i| {
                rate[i].scale(2.0 * jd[i] * jd[i]).add(&g[i].square().scale(2.0))
            }))
        }
    };
    Ok(bound)
}

fn gyro_terms(terms: &BoundTerms, w3: &Polynomial64, params: &VehicleParams) -> Result<[Polynomial64; 3]> {
    if !params.is_inertia_diagonal() {
        return Err(Error::Unsupported(
            "gyroscopic bound requires a diagonal inertia".into(),
        ));
    }
    let d = params.inertia.diagonal();
    let (ixx, iyy, izz) = (d[0], d[1], d[2]);
    let with_w3 = terms.w12().add(w3).scale(0.5);
    Ok([
        with_w3.scale((izz - iyy).abs()),
        with_w3.scale((ixx - izz).abs()),
        terms.w12().scale(0.5 * (iyy - ixx).abs()),
    ])
}

/// Componentwise bound on `|Ω × JΩ|` over one segment.
pub fn gyroscopic_bound(traj: &Spline64, segment: usize, params: &VehicleParams) -> Result<[Polynomial64; 3]> {
    let axes = segment_axes(traj, segment)?;
    let terms = BoundTerms::new(axes, params);
    gyro_terms(&terms, &terms.w3(), params)
}
