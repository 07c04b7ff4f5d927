//! 3-DOF surface vessel model.
//!
//! ```text
//! eta_dot = R(psi) * nu
//! M * nu_dot + C(nu) * nu + D(nu) * nu = tau + tau_d
//! ```
//!
//! with `eta = [x, y, psi]` (north, east, heading) and `nu = [u, v, r]`
//! (surge, sway, yaw rate). `M` is symmetric with the usual port/starboard
//! structure (`m12 = m13 = 0`), `C(nu)` is the skew-symmetric
//! Coriolis/centripetal matrix derived from `M`, and
//! `D(nu) = diag(d_lin) + diag(d_quad .* |nu|)`.

use nalgebra::{Matrix3, Matrix6, Matrix6x2, Vector2, Vector3, Vector6};
use thiserror::Error;

use crate::angle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid vessel parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite state derivative (check vessel parameters)")]
    NonFiniteDerivative,
    #[error("integration produced a non-finite state")]
    IntegrationFailure,
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
}

/// Pose in the north-east frame plus body-frame velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VesselState {
    /// North position [m].
    pub x: f64,
    /// East position [m].
    pub y: f64,
    /// Heading [rad], kept in (−π, π].
    pub psi: f64,
    /// Surge velocity [m/s].
    pub u: f64,
    /// Sway velocity [m/s].
    pub v: f64,
    /// Yaw rate [rad/s].
    pub r: f64,
}

impl VesselState {
    pub fn new(x: f64, y: f64, psi: f64, u: f64, v: f64, r: f64) -> Self {
        Self { x, y, psi: angle::wrap(psi), u, v, r }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.x, self.y, self.psi, self.u, self.v, self.r)
    }

    /// Builds a state from a raw vector, wrapping the heading.
    pub fn from_vector(x: &Vector6<f64>) -> Self {
        Self::new(x[0], x[1], x[2], x[3], x[4], x[5])
    }

    pub fn nu(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.r)
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Actuated generalized forces. Sway is not actuated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    /// Surge thrust [N].
    pub tau_u: f64,
    /// Yaw moment [N·m].
    pub tau_r: f64,
}

impl ControlInput {
    pub fn new(tau_u: f64, tau_r: f64) -> Self {
        Self { tau_u, tau_r }
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.tau_u, self.tau_r)
    }

    /// `[tau_u, 0, tau_r]`.
    pub fn generalized(&self) -> Vector3<f64> {
        Vector3::new(self.tau_u, 0.0, self.tau_r)
    }

    pub fn clamped(&self, lower: &Vector2<f64>, upper: &Vector2<f64>) -> Self {
        Self {
            tau_u: self.tau_u.clamp(lower[0], upper[0]),
            tau_r: self.tau_r.clamp(lower[1], upper[1]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tau_u.is_finite() && self.tau_r.is_finite()
    }
}

/// Environmental forces in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DisturbanceVector {
    /// Surge force [N].
    pub surge: f64,
    /// Sway force [N].
    pub sway: f64,
    /// Yaw moment [N·m].
    pub yaw: f64,
}

impl DisturbanceVector {
    pub const ZERO: Self = Self { surge: 0.0, sway: 0.0, yaw: 0.0 };

    pub fn new(surge: f64, sway: f64, yaw: f64) -> Self {
        Self { surge, sway, yaw }
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.surge, self.sway, self.yaw)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Model coefficients and actuator limits.
///
/// The inverse mass matrix is cached, so the mass matrix can only be set
/// through [`VesselParams::new`] or [`VesselParams::scaled`].
#[derive(Debug, Clone, PartialEq)]
pub struct VesselParams {
    mass: Matrix3<f64>,
    mass_inv: Matrix3<f64>,
    /// Linear damping per axis.
    pub linear_damping: Vector3<f64>,
    /// Quadratic (`d |v| v`) damping per axis.
    pub quadratic_damping: Vector3<f64>,
    /// Lower bounds on `[tau_u, tau_r]`.
    pub input_lower: Vector2<f64>,
    /// Upper bounds on `[tau_u, tau_r]`.
    pub input_upper: Vector2<f64>,
    /// Yaw-rate magnitude bound used as a state constraint [rad/s].
    pub max_yaw_rate: f64,
    /// Draft [m].
    pub draft: f64,
}

impl Default for VesselParams {
    /// A ~5 t, 10 m class vessel. Diagonal-dominant mass matrix with a small
    /// sway/yaw coupling, linear plus quadratic damping. Cruises at 7 m/s
    /// with roughly 3.5 kN thrust; steady turn rate saturates near 0.29 rad/s.
    ///
    /// Surge and sway inertia are equal: with purely diagonal damping a
    /// Munk moment `(m22 − m11) u v` would make straight-line motion
    /// unstable at cruise speed.
    fn default() -> Self {
        Self::new(
            Matrix3::new(5200.0, 0.0, 0.0, 0.0, 5200.0, 400.0, 0.0, 400.0, 24000.0),
            Vector3::new(120.0, 3000.0, 8000.0),
            Vector3::new(55.0, 1500.0, 20000.0),
            Vector2::new(-4000.0, -4000.0),
            Vector2::new(12000.0, 4000.0),
            0.35,
            1.5,
        )
        .expect("default vessel parameters are valid")
    }
}

impl VesselParams {
    pub fn new(
        mass: Matrix3<f64>,
        linear_damping: Vector3<f64>,
        quadratic_damping: Vector3<f64>,
        input_lower: Vector2<f64>,
        input_upper: Vector2<f64>,
        max_yaw_rate: f64,
        draft: f64,
    ) -> Result<Self, DynamicsError> {
        let bad = |msg: &str| Err(DynamicsError::InvalidParams(msg.to_string()));
        if !mass.iter().all(|v| v.is_finite()) {
            return bad("mass matrix entries must be finite");
        }
        if (mass - mass.transpose()).abs().max() > 1e-9 * mass.abs().max() {
            return bad("mass matrix must be symmetric");
        }
        if mass[(0, 1)] != 0.0 || mass[(0, 2)] != 0.0 {
            return bad("mass matrix must have m12 = m13 = 0 (port/starboard symmetry)");
        }
        if mass.cholesky().is_none() {
            return bad("mass matrix must be positive definite");
        }
        let mass_inv = match mass.try_inverse() {
            Some(m) if m.iter().all(|v| v.is_finite()) => m,
            _ => return bad("mass matrix must be invertible with finite inverse"),
        };
        if linear_damping.iter().chain(quadratic_damping.iter()).any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("damping coefficients must be finite and non-negative");
        }
        if (0..2).any(|i| !(input_lower[i] < input_upper[i]) || !input_lower[i].is_finite() || !input_upper[i].is_finite()) {
            return bad("input bounds must be finite with lower < upper");
        }
        if (0..2).any(|i| input_lower[i] > 0.0 || input_upper[i] < 0.0) {
            return bad("input bounds must contain zero");
        }
        if !(max_yaw_rate > 0.0) {
            return bad("max_yaw_rate must be positive");
        }
        if !(draft > 0.0 && draft.is_finite()) {
            return bad("draft must be positive");
        }
        let p = Self {
            mass,
            mass_inv,
            linear_damping,
            quadratic_damping,
            input_lower,
            input_upper,
            max_yaw_rate,
            draft,
        };
        if !(p.sigma() > 0.0) {
            return bad("sigma = 1 - k23*k32/(k22*k33) must be positive");
        }
        Ok(p)
    }

    pub fn mass(&self) -> &Matrix3<f64> {
        &self.mass
    }

    pub fn mass_inv(&self) -> &Matrix3<f64> {
        &self.mass_inv
    }

    /// Coupling factor `1 − κ23 κ32 / (κ22 κ33)` from the inverse mass matrix.
    pub fn sigma(&self) -> f64 {
        let k = &self.mass_inv;
        1.0 - k[(1, 2)] * k[(2, 1)] / (k[(1, 1)] * k[(2, 2)])
    }

    /// Copy with the mass matrix and both damping vectors scaled.
    pub fn scaled(&self, mass_factor: f64, damping_factor: f64) -> Result<Self, DynamicsError> {
        Self::new(
            self.mass * mass_factor,
            self.linear_damping * damping_factor,
            self.quadratic_damping * damping_factor,
            self.input_lower,
            self.input_upper,
            self.max_yaw_rate,
            self.draft,
        )
    }

    /// Coriolis and centripetal matrix.
    pub fn coriolis(&self, nu: &Vector3<f64>) -> Matrix3<f64> {
        let m = &self.mass;
        let (u, v, r) = (nu[0], nu[1], nu[2]);
        let c13 = -(m[(1, 1)] * v + m[(1, 2)] * r);
        let c23 = m[(0, 0)] * u;
        Matrix3::new(0.0, 0.0, c13, 0.0, 0.0, c23, -c13, -c23, 0.0)
    }

    /// Damping matrix `D(nu)`.
    pub fn damping(&self, nu: &Vector3<f64>) -> Matrix3<f64> {
        Matrix3::from_diagonal(&(self.linear_damping + self.quadratic_damping.component_mul(&nu.abs())))
    }

    /// `C(nu) nu + D(nu) nu`.
    fn hydrodynamic_force(&self, nu: &Vector3<f64>) -> Vector3<f64> {
        self.coriolis(nu) * nu + self.damping(nu) * nu
    }

    /// Jacobian of `C(nu) nu + D(nu) nu` with respect to `nu`.
    fn hydrodynamic_jacobian(&self, nu: &Vector3<f64>) -> Matrix3<f64> {
        let m = &self.mass;
        let (m11, m22, m23) = (m[(0, 0)], m[(1, 1)], m[(1, 2)]);
        let (u, v, r) = (nu[0], nu[1], nu[2]);
        let coriolis = Matrix3::new(
            0.0,
            -m22 * r,
            -m22 * v - 2.0 * m23 * r,
            m11 * r,
            0.0,
            m11 * u,
            (m22 - m11) * v + m23 * r,
            (m22 - m11) * u,
            m23 * u,
        );
        let damping = Matrix3::from_diagonal(&(self.linear_damping + 2.0 * self.quadratic_damping.component_mul(&nu.abs())));
        coriolis + damping
    }

    /// Body-frame acceleration `M^-1 (tau + tau_d − C nu − D nu)`.
    pub fn acceleration(&self, nu: &Vector3<f64>, tau: &Vector3<f64>, tau_d: &Vector3<f64>) -> Vector3<f64> {
        self.mass_inv * (tau + tau_d - self.hydrodynamic_force(nu))
    }
}

/// Rotation about the vertical axis.
pub fn rotation_matrix(psi: f64) -> Matrix3<f64> {
    let (s, c) = psi.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Continuous-time right-hand side on raw state vectors; the heading is
/// not wrapped.
pub fn derivative_vec(x: &Vector6<f64>, tau: &Vector2<f64>, d: &Vector3<f64>, p: &VesselParams) -> Vector6<f64> {
    let nu = Vector3::new(x[3], x[4], x[5]);
    let eta_dot = rotation_matrix(x[2]) * nu;
    let nu_dot = p.acceleration(&nu, &Vector3::new(tau[0], 0.0, tau[1]), d);
    Vector6::new(eta_dot[0], eta_dot[1], eta_dot[2], nu_dot[0], nu_dot[1], nu_dot[2])
}

/// Time derivative of the full state.
pub fn state_derivative(
    x: &VesselState,
    u: &ControlInput,
    d: &DisturbanceVector,
    p: &VesselParams,
) -> Result<Vector6<f64>, DynamicsError> {
    let dx = derivative_vec(&x.to_vector(), &u.to_vector(), &d.to_vector(), p);
    if dx.iter().all(|v| v.is_finite()) {
        Ok(dx)
    } else {
        Err(DynamicsError::NonFiniteDerivative)
    }
}

/// Classic RK4 step on raw vectors; no heading wrap.
pub fn rk4_vec(x: &Vector6<f64>, tau: &Vector2<f64>, d: &Vector3<f64>, p: &VesselParams, dt: f64) -> Vector6<f64> {
    let k1 = derivative_vec(x, tau, d, p);
    let k2 = derivative_vec(&(x + 0.5 * dt * k1), tau, d, p);
    let k3 = derivative_vec(&(x + 0.5 * dt * k2), tau, d, p);
    let k4 = derivative_vec(&(x + dt * k3), tau, d, p);
    x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// One fixed RK4 step with the heading re-wrapped.
pub fn integrate_step(
    x: &VesselState,
    u: &ControlInput,
    d: &DisturbanceVector,
    p: &VesselParams,
    dt: f64,
) -> Result<VesselState, DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::BadTimeStep(dt));
    }
    let next = rk4_vec(&x.to_vector(), &u.to_vector(), &d.to_vector(), p, dt);
    if next.iter().all(|v| v.is_finite()) {
        Ok(VesselState::from_vector(&next))
    } else {
        Err(DynamicsError::IntegrationFailure)
    }
}

/// Jacobians of the continuous right-hand side with respect to state and
/// `[tau_u, tau_r]`.
pub fn derivative_jacobians(x: &Vector6<f64>, p: &VesselParams) -> (Matrix6<f64>, Matrix6x2<f64>) {
    let (s, c) = x[2].sin_cos();
    let (u, v) = (x[3], x[4]);
    let nu = Vector3::new(x[3], x[4], x[5]);
    let mut a = Matrix6::zeros();
    a[(0, 2)] = -s * u - c * v;
    a[(1, 2)] = c * u - s * v;
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&rotation_matrix(x[2]));
    let kin = -p.mass_inv * p.hydrodynamic_jacobian(&nu);
    a.fixed_view_mut::<3, 3>(3, 3).copy_from(&kin);
    let mut b = Matrix6x2::zeros();
    for row in 0..3 {
        b[(3 + row, 0)] = p.mass_inv[(row, 0)];
        b[(3 + row, 1)] = p.mass_inv[(row, 2)];
    }
    (a, b)
}

/// RK4 step together with its exact Jacobians `(x_next, dx_next/dx, dx_next/dtau)`.
pub fn rk4_with_jacobians(
    x: &Vector6<f64>,
    tau: &Vector2<f64>,
    d: &Vector3<f64>,
    p: &VesselParams,
    dt: f64,
) -> (Vector6<f64>, Matrix6<f64>, Matrix6x2<f64>) {
    let eye = Matrix6::identity();
    let h = dt;

    let k1 = derivative_vec(x, tau, d, p);
    let (j1, b) = derivative_jacobians(x, p);
    let k1x = j1;
    let k1u = b;

    let x2 = x + 0.5 * h * k1;
    let k2 = derivative_vec(&x2, tau, d, p);
    let (j2, _) = derivative_jacobians(&x2, p);
    let k2x = j2 * (eye + 0.5 * h * k1x);
    let k2u = j2 * (0.5 * h * k1u) + b;

    let x3 = x + 0.5 * h * k2;
    let k3 = derivative_vec(&x3, tau, d, p);
    let (j3, _) = derivative_jacobians(&x3, p);
    let k3x = j3 * (eye + 0.5 * h * k2x);
    let k3u = j3 * (0.5 * h * k2u) + b;

    let x4 = x + h * k3;
    let k4 = derivative_vec(&x4, tau, d, p);
    let (j4, _) = derivative_jacobians(&x4, p);
    let k4x = j4 * (eye + h * k3x);
    let k4u = j4 * (h * k3u) + b;

    let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    let ax = eye + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    let bu = h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    (next, ax, bu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn diagonal_linear() -> VesselParams {
        VesselParams::new(
            Matrix3::from_diagonal(&Vector3::new(1000.0, 1500.0, 8000.0)),
            Vector3::new(50.0, 200.0, 900.0),
            Vector3::zeros(),
            Vector2::new(-1e4, -1e4),
            Vector2::new(1e4, 1e4),
            0.5,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn rotation_identity_and_quarter_turn() {
        assert_eq!(rotation_matrix(0.0), Matrix3::identity());
        let q = rotation_matrix(PI / 2.0);
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((q - expected).abs().max() < 1e-15);
    }

    proptest! {
        #[test]
        fn rotation_is_orthogonal(psi in -PI..PI) {
            let r = rotation_matrix(psi);
            prop_assert!((r.transpose() * r - Matrix3::identity()).abs().max() <= 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() <= 1e-12);
            prop_assert_eq!(r[(2, 2)], 1.0);
        }

        #[test]
        fn coriolis_is_skew(u in -10.0f64..10.0, v in -3.0f64..3.0, r in -1.0f64..1.0) {
            let p = VesselParams::default();
            let nu = Vector3::new(u, v, r);
            let c = p.coriolis(&nu);
            prop_assert!((c + c.transpose()).abs().max() < 1e-9);
            prop_assert!(nu.dot(&(c * nu)).abs() < 1e-6);
        }

        #[test]
        fn damping_dissipates(u in -10.0f64..10.0, v in -3.0f64..3.0, r in -1.0f64..1.0) {
            let p = VesselParams::default();
            let nu = Vector3::new(u, v, r);
            prop_assert!(nu.dot(&(p.damping(&nu) * nu)) >= 0.0);
        }
    }

    #[test]
    fn equilibrium_has_zero_derivative() {
        let p = VesselParams::default();
        let x = VesselState::new(10.0, -4.0, 1.0, 0.0, 0.0, 0.0);
        let dx = state_derivative(&x, &ControlInput::default(), &DisturbanceVector::ZERO, &p).unwrap();
        assert_eq!(dx, Vector6::zeros());
    }

    #[test]
    fn pure_surge_decelerates_by_linear_damping() {
        let p = diagonal_linear();
        let psi = 0.7;
        let x = VesselState::new(0.0, 0.0, psi, 1.0, 0.0, 0.0);
        let dx = state_derivative(&x, &ControlInput::default(), &DisturbanceVector::ZERO, &p).unwrap();
        let eta_dot = rotation_matrix(psi) * Vector3::new(1.0, 0.0, 0.0);
        assert!((dx.fixed_rows::<3>(0) - eta_dot).norm() < 1e-15);
        assert!((dx[3] + 50.0 / 1000.0).abs() < 1e-15);
        assert_eq!(dx[4], 0.0);
        assert_eq!(dx[5], 0.0);
    }

    #[test]
    fn input_cancels_disturbance() {
        let p = VesselParams::default();
        let x = VesselState::default();
        let u = ControlInput::new(800.0, -300.0);
        let d = DisturbanceVector::new(-800.0, 0.0, 300.0);
        let dx = state_derivative(&x, &u, &d, &p).unwrap();
        assert!(dx.norm() < 1e-12);
    }

    #[test]
    fn zero_derivative_is_a_fixed_point() {
        let p = VesselParams::default();
        let x = VesselState::new(3.0, 4.0, -2.0, 0.0, 0.0, 0.0);
        let next = integrate_step(&x, &ControlInput::default(), &DisturbanceVector::ZERO, &p, 0.5).unwrap();
        assert_eq!(next, x);
    }

    #[test]
    fn pure_rotation_advances_heading() {
        // No damping or coupling so r stays constant.
        let p = VesselParams::new(
            Matrix3::from_diagonal(&Vector3::new(1000.0, 1000.0, 1000.0)),
            Vector3::zeros(),
            Vector3::zeros(),
            Vector2::new(-1.0, -1.0),
            Vector2::new(1.0, 1.0),
            1.0,
            1.0,
        )
        .unwrap();
        let x = VesselState::new(0.0, 0.0, 0.3, 0.0, 0.0, 0.1);
        let next = integrate_step(&x, &ControlInput::default(), &DisturbanceVector::ZERO, &p, 0.5).unwrap();
        assert!((next.psi - 0.35).abs() < 1e-15);
        assert_eq!(next.r, 0.1);
    }

    #[test]
    fn rejects_bad_step_and_params() {
        let p = VesselParams::default();
        assert!(matches!(
            integrate_step(&VesselState::default(), &ControlInput::default(), &DisturbanceVector::ZERO, &p, 0.0),
            Err(DynamicsError::BadTimeStep(_))
        ));
        let asym = Matrix3::new(1.0, 0.0, 0.0, 0.0, 2.0, 0.5, 0.0, 0.1, 3.0);
        assert!(VesselParams::new(asym, Vector3::zeros(), Vector3::zeros(), Vector2::new(-1.0, -1.0), Vector2::new(1.0, 1.0), 1.0, 1.0).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let p = VesselParams::default();
        let x = VesselState::new(0.0, 0.0, 0.0, 1e300, 1e300, 0.0);
        assert_eq!(
            state_derivative(&x, &ControlInput::default(), &DisturbanceVector::ZERO, &p),
            Err(DynamicsError::NonFiniteDerivative)
        );
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let p = VesselParams::default();
        let x = Vector6::new(10.0, -5.0, 0.4, 6.0, -0.3, 0.08);
        let tau = Vector2::new(3000.0, 500.0);
        let d = Vector3::new(100.0, -50.0, 200.0);
        let (next, a, b) = rk4_with_jacobians(&x, &tau, &d, &p, 0.5);
        assert_eq!(next, rk4_vec(&x, &tau, &d, &p, 0.5));
        for j in 0..6 {
            let h = 1e-6 * (1.0 + x[j].abs());
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let col = (rk4_vec(&xp, &tau, &d, &p, 0.5) - rk4_vec(&xm, &tau, &d, &p, 0.5)) / (2.0 * h);
            assert!((col - a.column(j)).abs().max() < 1e-6, "column {j}");
        }
        for j in 0..2 {
            let h = 1e-3;
            let mut tp = tau;
            let mut tm = tau;
            tp[j] += h;
            tm[j] -= h;
            let col = (rk4_vec(&x, &tp, &d, &p, 0.5) - rk4_vec(&x, &tm, &d, &p, 0.5)) / (2.0 * h);
            assert!((col - b.column(j)).abs().max() < 1e-9, "input column {j}");
        }
    }
}
