//! Nonlinear disturbance observer.
//!
//! The estimate is `tau_d_hat = zeta + T nu` with
//! `zeta_dot = −T nu_dot(tau_d = zeta + T nu)`, where `nu_dot` comes from the
//! kinetic model. With `T` built from the inverse mass matrix entries
//! `κ_ij` as below, `T M^-1 = diag(Γ_i σ)` and the estimation error obeys
//! `e_dot = −diag(Γ_i σ) e` for constant disturbances.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::dynamics::{ControlInput, DisturbanceVector, VesselParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObserverError {
    #[error("observer gain Gamma{index} must be positive, got {value}")]
    NonPositiveGain { index: usize, value: f64 },
    #[error("sigma = {0} must be positive for observer stability")]
    NonPositiveSigma(f64),
    #[error("discrete stability requires Gamma_i*sigma*dt < 2, axis {axis} has {value}")]
    DiscreteUnstable { axis: usize, value: f64 },
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("observer produced a non-finite acceleration")]
    Fault,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverGains {
    pub gamma: Vector3<f64>,
    pub sigma: f64,
    pub t: Matrix3<f64>,
}

impl ObserverGains {
    /// Per-axis decay rates `Γ_i σ` of the continuous error dynamics.
    pub fn decay_rates(&self) -> Vector3<f64> {
        self.gamma * self.sigma
    }

    /// Rejects gains whose RK4-discretised error dynamics would not be
    /// comfortably stable at the sampling period `dt`.
    pub fn check_discrete_stability(&self, dt: f64) -> Result<(), ObserverError> {
        for (axis, rate) in self.decay_rates().iter().enumerate() {
            let value = rate * dt;
            if !(value < 2.0) {
                return Err(ObserverError::DiscreteUnstable { axis: axis + 1, value });
            }
        }
        Ok(())
    }
}

/// Builds `T` from the inverse mass matrix and the three gains.
pub fn build_gains(params: &VesselParams, gamma: [f64; 3]) -> Result<ObserverGains, ObserverError> {
    for (i, g) in gamma.iter().enumerate() {
        if !(*g > 0.0 && g.is_finite()) {
            return Err(ObserverError::NonPositiveGain { index: i + 1, value: *g });
        }
    }
    let k = params.mass_inv();
    let (k11, k22, k23, k32, k33) = (k[(0, 0)], k[(1, 1)], k[(1, 2)], k[(2, 1)], k[(2, 2)]);
    let sigma = 1.0 - (k23 * k32) / (k22 * k33);
    if !(sigma > 0.0) {
        return Err(ObserverError::NonPositiveSigma(sigma));
    }
    let [g1, g2, g3] = gamma;
    let mut t = Matrix3::zeros();
    t[(0, 0)] = g1 * sigma / k11;
    t[(1, 1)] = g2 / k22;
    t[(1, 2)] = -g2 * k23 / (k22 * k33);
    t[(2, 1)] = -g3 * k32 / (k22 * k33);
    t[(2, 2)] = g3 / k33;
    Ok(ObserverGains { gamma: Vector3::from(gamma), sigma, t })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub zeta: Vector3<f64>,
    pub tau_d_hat: Vector3<f64>,
}

impl ObserverState {
    /// Start with a zero disturbance estimate at the measured velocity.
    pub fn new(nu: &Vector3<f64>, gains: &ObserverGains) -> Self {
        let zeta = -(gains.t * nu);
        Self { zeta, tau_d_hat: zeta + gains.t * nu }
    }

    pub fn estimate(&self) -> DisturbanceVector {
        DisturbanceVector::from_vector(&self.tau_d_hat)
    }
}

/// Advances `zeta` over one sampling interval and refreshes the estimate at
/// the new measurement `nu`.
///
/// `tau` is the input applied during the interval. The velocity is held at
/// `nu` while `zeta_dot` is integrated with RK4.
pub fn observer_step(
    obs: &ObserverState,
    nu: &Vector3<f64>,
    tau: &ControlInput,
    gains: &ObserverGains,
    params: &VesselParams,
    dt: f64,
) -> Result<ObserverState, ObserverError> {
    if !(dt > 0.0) {
        return Err(ObserverError::BadTimeStep(dt));
    }
    let tau = tau.generalized();
    let t_nu = gains.t * nu;
    let zeta_dot = |zeta: &Vector3<f64>| -> Vector3<f64> {
        let nu_dot = params.acceleration(nu, &tau, &(zeta + t_nu));
        -(gains.t * nu_dot)
    };
    let z = obs.zeta;
    let k1 = zeta_dot(&z);
    let k2 = zeta_dot(&(z + 0.5 * dt * k1));
    let k3 = zeta_dot(&(z + 0.5 * dt * k2));
    let k4 = zeta_dot(&(z + dt * k3));
    let zeta = z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if !zeta.iter().all(|v| v.is_finite()) {
        return Err(ObserverError::Fault);
    }
    Ok(ObserverState { zeta, tau_d_hat: zeta + t_nu })
}
