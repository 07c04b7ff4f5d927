//! Multiple-shooting transcription of the tracking OCP.

use nalgebra::{Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::dynamics::{rk4_vec, VesselParams, VesselState};
use crate::guidance::GuidanceCommand;
use crate::DisturbanceVector;

use super::OcpError;

/// Controller tuning as read from a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmpcConfig {
    pub horizon: usize,
    pub dt: f64,
    /// Yaw-rate weight in Q.
    pub q_yaw_rate: f64,
    /// Lower bound on the μ-weighted heading and surge entries of Q.
    pub mu_floor: f64,
    pub r_surge: f64,
    pub r_yaw: f64,
    /// W entries for heading, surge and yaw-rate errors.
    pub slack_weights: [f64; 3],
    /// Multiplier on `Q + W` for the terminal state error; 0 disables it.
    pub terminal_scale: f64,
    /// Surge bound as a multiple of the planned speed.
    pub surge_bound_factor: f64,
    pub max_iter: usize,
    pub tol_stationarity: f64,
    pub tol_feasibility: f64,
    pub observer_gain: [f64; 3],
}

impl Default for NmpcConfig {
    fn default() -> Self {
        Self {
            horizon: 60,
            dt: 0.5,
            q_yaw_rate: 150.0,
            mu_floor: 1.0,
            r_surge: 0.0,
            r_yaw: 1e-4,
            slack_weights: [1e3; 3],
            terminal_scale: 1.0,
            surge_bound_factor: 1.5,
            max_iter: 50,
            tol_stationarity: 1e-6,
            tol_feasibility: 1e-6,
            observer_gain: [0.2; 3],
        }
    }
}

impl NmpcConfig {
    pub fn validate(&self) -> Result<(), OcpError> {
        let bad = |what: &str| Err(OcpError::InvalidConfig(what.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        let weights = [self.q_yaw_rate, self.mu_floor, self.r_surge, self.r_yaw, self.terminal_scale];
        if weights.iter().chain(&self.slack_weights).any(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad("weights must be finite and non-negative");
        }
        if !(self.surge_bound_factor > 0.0) {
            return bad("surge_bound_factor must be positive");
        }
        if !(self.tol_stationarity > 0.0 && self.tol_feasibility > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.observer_gain.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return bad("observer_gain entries must be positive");
        }
        Ok(())
    }
}

/// Diagonal weights. `r` holds the `[tau_u, tau_r]` entries; the other
/// generalized-force entries have no actuator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcpWeights {
    pub q: Vector6<f64>,
    pub r: Vector2<f64>,
    pub w: Vector6<f64>,
}

impl OcpWeights {
    /// `Q = diag(0, 0, m, m, 0, q_r)` with `m = max(mu, mu_floor)`.
    pub fn from_config(cfg: &NmpcConfig, mu: f64) -> Self {
        let m = mu.max(cfg.mu_floor);
        let [wp, wu, wr] = cfg.slack_weights;
        Self {
            q: Vector6::new(0.0, 0.0, m, m, 0.0, cfg.q_yaw_rate),
            r: Vector2::new(cfg.r_surge, cfg.r_yaw),
            w: Vector6::new(0.0, 0.0, wp, wu, 0.0, wr),
        }
    }

    fn reduced(v: &Vector6<f64>) -> Vector3<f64> {
        Vector3::new(v[2], v[3], v[5])
    }

    pub fn q_reduced(&self) -> Vector3<f64> {
        Self::reduced(&self.q)
    }

    pub fn w_reduced(&self) -> Vector3<f64> {
        Self::reduced(&self.w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateBounds {
    pub surge_min: f64,
    pub surge_max: f64,
    pub yaw_rate_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iter: usize,
    pub tol_stationarity: f64,
    pub tol_feasibility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpProblem {
    pub horizon: usize,
    pub dt: f64,
    pub x0: VesselState,
    pub command: GuidanceCommand,
    pub disturbance: DisturbanceVector,
    pub params: VesselParams,
    pub bounds: StateBounds,
    pub weights: OcpWeights,
    pub terminal_scale: f64,
    pub settings: SolverSettings,
}

/// Decision variables: `N + 1` states with continuous heading, `N` inputs
/// `[tau_u, tau_r]` and `N` slacks on the (ψ, u, r) errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vector6<f64>>,
    pub inputs: Vec<Vector2<f64>>,
    pub slacks: Vec<Vector3<f64>>,
}

/// `[0, 0, wrap(ψ_des − ψ), u_des − u, 0, r]`.
pub fn state_error(x: &VesselState, cmd: &GuidanceCommand) -> Vector6<f64> {
    Vector6::new(0.0, 0.0, angle::diff(cmd.psi_des, x.psi), cmd.u_des - x.u, 0.0, x.r)
}

pub fn build_ocp(
    x0: &VesselState,
    cmd: &GuidanceCommand,
    d_hat: &DisturbanceVector,
    weights: &OcpWeights,
    params: &VesselParams,
    cfg: &NmpcConfig,
    u_sp: f64,
) -> Result<OcpProblem, OcpError> {
    cfg.validate()?;
    let finite = x0.is_finite()
        && [cmd.psi_des, cmd.u_des].iter().all(|v| v.is_finite())
        && d_hat.to_vector().iter().all(|v| v.is_finite());
    if !finite {
        return Err(OcpError::NonFinite);
    }
    let u_max = cfg.surge_bound_factor * u_sp.abs();
    Ok(OcpProblem {
        horizon: cfg.horizon,
        dt: cfg.dt,
        x0: *x0,
        command: *cmd,
        disturbance: *d_hat,
        params: params.clone(),
        bounds: StateBounds { surge_min: -u_max, surge_max: u_max, yaw_rate_max: params.max_yaw_rate },
        weights: *weights,
        terminal_scale: cfg.terminal_scale,
        settings: SolverSettings {
            max_iter: cfg.max_iter,
            tol_stationarity: cfg.tol_stationarity,
            tol_feasibility: cfg.tol_feasibility,
        },
    })
}

impl OcpProblem {
    pub fn validate(&self) -> Result<(), OcpError> {
        if self.horizon == 0 || !(self.dt > 0.0) {
            return Err(OcpError::InvalidConfig("horizon and dt must be positive".into()));
        }
        if !self.x0.is_finite() || !self.disturbance.to_vector().iter().all(|v| v.is_finite()) {
            return Err(OcpError::NonFinite);
        }
        Ok(())
    }

    /// Desired heading unwrapped next to the initial heading, so predicted
    /// headings can be compared without wrapping.
    pub fn psi_reference(&self) -> f64 {
        self.x0.psi + angle::diff(self.command.psi_des, self.x0.psi)
    }

    /// (ψ, u, r) tracking error of a raw predicted state.
    pub fn tracking_error(&self, x: &Vector6<f64>) -> Vector3<f64> {
        Vector3::new(self.psi_reference() - x[2], self.command.u_des - x[3], x[5])
    }

    pub fn input_scale(&self) -> Vector2<f64> {
        let (lo, hi) = (&self.params.input_lower, &self.params.input_upper);
        Vector2::new(lo[0].abs().max(hi[0].abs()), lo[1].abs().max(hi[1].abs()))
    }

    /// Next shooting state.
    pub fn shoot(&self, x: &Vector6<f64>, u: &Vector2<f64>) -> Vector6<f64> {
        rk4_vec(x, u, &self.disturbance.to_vector(), &self.params, self.dt)
    }

    /// Dynamics defects `f(x_k, u_k) − x_{k+1}` with `x_0` pinned to the
    /// initial state.
    pub fn defects(&self, t: &Trajectory) -> Vec<Vector6<f64>> {
        let mut out = Vec::with_capacity(self.horizon + 1);
        out.push(self.x0.to_vector() - t.states[0]);
        for k in 0..self.horizon {
            out.push(self.shoot(&t.states[k], &t.inputs[k]) - t.states[k + 1]);
        }
        out
    }

    pub fn max_defect(&self, t: &Trajectory) -> f64 {
        self.defects(t).iter().fold(0.0, |m, d| m.max(d.amax()))
    }

    /// Stage costs for k = 0..N−1 plus the terminal state-error cost.
    pub fn objective(&self, t: &Trajectory) -> f64 {
        let q = self.weights.q_reduced();
        let w = self.weights.w_reduced();
        let r = self.weights.r;
        let mut j = 0.0;
        for k in 0..self.horizon {
            let e = self.tracking_error(&t.states[k]);
            let u = &t.inputs[k];
            let xi = &t.slacks[k];
            j += e.component_mul(&e).dot(&q) + u.component_mul(u).dot(&r) + xi.component_mul(xi).dot(&w);
        }
        let e = self.tracking_error(&t.states[self.horizon]);
        j + self.terminal_scale * e.component_mul(&e).dot(&(q + w))
    }

    /// Analytic gradient of [`Self::objective`], laid out like the trajectory.
    pub fn objective_gradient(&self, t: &Trajectory) -> Trajectory {
        let q = self.weights.q_reduced();
        let w = self.weights.w_reduced();
        let r = self.weights.r;
        let n = self.horizon;
        let error_grad = |x: &Vector6<f64>, weight: &Vector3<f64>| {
            let e = self.tracking_error(x);
            // ∂e/∂x: ψ and u enter with −1, r with +1.
            let mut g = Vector6::zeros();
            g[2] = -2.0 * weight[0] * e[0];
            g[3] = -2.0 * weight[1] * e[1];
            g[5] = 2.0 * weight[2] * e[2];
            g
        };
        let mut states: Vec<_> = t.states[..n].iter().map(|x| error_grad(x, &q)).collect();
        states.push(error_grad(&t.states[n], &(self.terminal_scale * (q + w))));
        Trajectory {
            states,
            inputs: t.inputs.iter().map(|u| 2.0 * r.component_mul(u)).collect(),
            slacks: t.slacks.iter().map(|xi| 2.0 * w.component_mul(xi)).collect(),
        }
    }

    /// States held at `x0`, zero inputs, slacks at the held error.
    pub fn cold_start(&self) -> Trajectory {
        let x0 = self.x0.to_vector();
        let xi = self.tracking_error(&x0).abs();
        Trajectory {
            states: vec![x0; self.horizon + 1],
            inputs: vec![Vector2::zeros(); self.horizon],
            slacks: vec![xi; self.horizon],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::GuidanceMode;

    fn cmd(psi_des: f64, u_des: f64) -> GuidanceCommand {
        GuidanceCommand { psi_des, u_des, mu: 0.0, alpha: 0.0, mode: GuidanceMode::PathFollow, d_min: f64::INFINITY }
    }

    #[test]
    fn state_error_examples() {
        let x = VesselState::new(5.0, 6.0, 0.4, 3.0, 0.2, 0.0);
        assert_eq!(state_error(&x, &cmd(0.4, 3.0)), Vector6::zeros());

        let x = VesselState::new(0.0, 0.0, -3.1, 0.0, 0.0, 0.0);
        let e = state_error(&x, &cmd(3.1, 0.0));
        // The short way from −3.1 to 3.1 runs down through ±π.
        let expected = 6.2 - 2.0 * std::f64::consts::PI;
        assert!((e[2] - expected).abs() < 1e-12);
        assert!((e[2].abs() - 0.0832).abs() < 1e-3);

        let x = VesselState::new(1.0, 2.0, 0.0, 4.0, 1.0, 0.1);
        let e = state_error(&x, &cmd(1.0, 7.0));
        assert_eq!(e[5], 0.1);
        assert_eq!((e[0], e[1], e[4]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn weights_follow_mu_with_floor() {
        let cfg = NmpcConfig::default();
        let w = OcpWeights::from_config(&cfg, 0.0);
        assert_eq!(w.q, Vector6::new(0.0, 0.0, 1.0, 1.0, 0.0, 150.0));
        assert_eq!(w.r, Vector2::new(0.0, 1e-4));
        assert_eq!(w.w, Vector6::new(0.0, 0.0, 1e3, 1e3, 0.0, 1e3));
        assert_eq!(OcpWeights::from_config(&cfg, 4.5).q[2], 4.5);
    }

    #[test]
    fn build_defaults() {
        let cfg = NmpcConfig::default();
        let p = VesselParams::default();
        let x0 = VesselState::new(0.0, 0.0, 0.0, 7.0, 0.0, 0.0);
        let c = cmd(0.0, 7.0);
        let ocp = build_ocp(&x0, &c, &DisturbanceVector::ZERO, &OcpWeights::from_config(&cfg, 0.0), &p, &cfg, 7.0).unwrap();
        assert_eq!((ocp.horizon, ocp.dt), (60, 0.5));
        assert_eq!(ocp.bounds.surge_max, 10.5);

        let bad = DisturbanceVector::new(f64::NAN, 0.0, 0.0);
        assert!(build_ocp(&x0, &c, &bad, &ocp.weights, &p, &cfg, 7.0).is_err());
    }
}
