//! Heading PID / surge PI baseline.

use serde::{Deserialize, Serialize};

use crate::angle;
use crate::dynamics::{ControlInput, VesselParams, VesselState};
use crate::guidance::GuidanceCommand;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    pub kp_heading: f64,
    pub ki_heading: f64,
    /// Acts on the measured yaw rate, not on the error.
    pub kd_heading: f64,
    pub kp_surge: f64,
    pub ki_surge: f64,
    /// Bound on `|ki · ∫e|` for the heading loop [N·m].
    pub heading_integral_limit: f64,
    /// Bound on `|ki · ∫e|` for the surge loop [N].
    pub surge_integral_limit: f64,
}

impl Default for PidGains {
    /// Pole placement on the default vessel's yaw axis at 0.3 rad/s with
    /// damping 0.9; integral time about ten loop time constants.
    fn default() -> Self {
        Self {
            kp_heading: 2200.0,
            ki_heading: 66.0,
            kd_heading: 5000.0,
            kp_surge: 2000.0,
            ki_surge: 400.0,
            heading_integral_limit: 2000.0,
            surge_integral_limit: 8000.0,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.kp_heading,
            self.ki_heading,
            self.kd_heading,
            self.kp_surge,
            self.ki_surge,
            self.heading_integral_limit,
            self.surge_integral_limit,
        ];
        if all.iter().all(|g| g.is_finite() && *g >= 0.0) {
            Ok(())
        } else {
            Err("PID gains and integral limits must be finite and non-negative".into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    heading_integral: f64,
    surge_integral: f64,
}

/// One sample of the control law; integrators advance by `dt` afterwards.
pub fn pid_baseline(
    x: &VesselState,
    cmd: &GuidanceCommand,
    gains: &PidGains,
    state: &mut PidState,
    params: &VesselParams,
    dt: f64,
) -> ControlInput {
    let e_psi = angle::diff(cmd.psi_des, x.psi);
    let e_u = cmd.u_des - x.u;
    let tau_r = gains.kp_heading * e_psi + gains.ki_heading * state.heading_integral - gains.kd_heading * x.r;
    let tau_u = gains.kp_surge * e_u + gains.ki_surge * state.surge_integral;

    state.heading_integral = clamp_integral(state.heading_integral + e_psi * dt, gains.ki_heading, gains.heading_integral_limit);
    state.surge_integral = clamp_integral(state.surge_integral + e_u * dt, gains.ki_surge, gains.surge_integral_limit);

    ControlInput::new(tau_u, tau_r).clamped(&params.input_lower, &params.input_upper)
}

fn clamp_integral(i: f64, ki: f64, limit: f64) -> f64 {
    if ki > 0.0 {
        let bound = limit / ki;
        i.clamp(-bound, bound)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_step, DisturbanceVector};
    use crate::guidance::GuidanceMode;

    fn cmd(psi_des: f64, u_des: f64) -> GuidanceCommand {
        GuidanceCommand { psi_des, u_des, mu: 1.0, alpha: 0.0, mode: GuidanceMode::PathFollow, d_min: f64::INFINITY }
    }

    #[test]
    fn zero_error_zero_input() {
        let p = VesselParams::default();
        let mut s = PidState::default();
        let x = VesselState::new(0.0, 0.0, 0.4, 0.0, 0.0, 0.0);
        let u = pid_baseline(&x, &cmd(0.4, 0.0), &PidGains::default(), &mut s, &p, 0.5);
        assert_eq!(u, ControlInput::new(0.0, 0.0));
    }

    #[test]
    fn proportional_law() {
        let p = VesselParams::default();
        let g = PidGains { ki_heading: 0.0, kd_heading: 0.0, ..PidGains::default() };
        let mut s = PidState::default();
        let x = VesselState::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let u = pid_baseline(&x, &cmd(0.3, 0.0), &g, &mut s, &p, 0.5);
        assert!((u.tau_r - g.kp_heading * 0.3).abs() < 1e-12);
    }

    #[test]
    fn heading_uses_short_way_round() {
        let p = VesselParams::default();
        let mut s = PidState::default();
        let x = VesselState::new(0.0, 0.0, 3.0, 0.0, 0.0, 0.0);
        let u = pid_baseline(&x, &cmd(-3.0, 0.0), &PidGains::default(), &mut s, &p, 0.5);
        assert!(u.tau_r > 0.0);
    }

    #[test]
    fn integrators_are_clamped() {
        let p = VesselParams::default();
        let g = PidGains::default();
        let mut s = PidState::default();
        let x = VesselState::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..10_000 {
            pid_baseline(&x, &cmd(1.0, 20.0), &g, &mut s, &p, 0.5);
        }
        assert!((g.ki_heading * s.heading_integral - g.heading_integral_limit).abs() < 1e-9);
        assert!((g.ki_surge * s.surge_integral - g.surge_integral_limit).abs() < 1e-9);
    }

    #[test]
    fn step_response_settles() {
        let p = VesselParams::default();
        let g = PidGains::default();
        let mut s = PidState::default();
        let mut x = VesselState::new(0.0, 0.0, 0.0, 7.0, 0.0, 0.0);
        let c = cmd(0.5, 7.0);
        let dt = 0.5;
        let mut tail_max: f64 = 0.0;
        // Settled from 90 s on.
        for k in 0..300 {
            let u = pid_baseline(&x, &c, &g, &mut s, &p, dt);
            x = integrate_step(&x, &u, &DisturbanceVector::ZERO, &p, dt).unwrap();
            if k >= 180 {
                tail_max = tail_max.max((x.psi - 0.5).abs());
            }
        }
        assert!(tail_max < 0.05 * 0.5, "residual {tail_max}");
        assert!((x.u - 7.0).abs() < 0.05 * 7.0);
    }
}
