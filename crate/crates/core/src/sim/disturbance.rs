//! Ground-truth environmental disturbance: constant bias plus a first-order
//! Gauss–Markov process per axis.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::DisturbanceVector;

/// Per-axis `[surge, sway, yaw]` parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceSpec {
    /// Constant part [N, N, N·m].
    pub bias: [f64; 3],
    /// Stationary standard deviation of the Gauss–Markov part.
    pub sigma: [f64; 3],
    /// Correlation time [s].
    pub time_constant: [f64; 3],
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl DisturbanceSpec {
    pub fn none() -> Self {
        Self { bias: [0.0; 3], sigma: [0.0; 3], time_constant: [60.0; 3] }
    }

    /// Wind and waves from the port side: pushes the hull to starboard and
    /// turns the bow to starboard.
    pub fn port_side() -> Self {
        Self { bias: [-150.0, 450.0, 1200.0], sigma: [60.0, 120.0, 300.0], time_constant: [60.0, 40.0, 40.0] }
    }

    /// Moderate, slowly varying weather.
    pub fn moderate() -> Self {
        Self { bias: [-100.0, 250.0, 600.0], sigma: [80.0, 120.0, 250.0], time_constant: [60.0, 45.0, 45.0] }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.bias.iter().all(|b| b.is_finite()) {
            return Err("disturbance bias must be finite".into());
        }
        if !self.sigma.iter().all(|s| s.is_finite() && *s >= 0.0) {
            return Err("disturbance sigma must be finite and non-negative".into());
        }
        if !self.time_constant.iter().all(|t| t.is_finite() && *t > 0.0) {
            return Err("disturbance time_constant must be positive".into());
        }
        Ok(())
    }
}

/// Sampled process on a fixed grid `t_k = k dt` with exact discretization.
#[derive(Debug, Clone)]
pub struct DisturbanceProcess {
    spec: DisturbanceSpec,
    dt: f64,
    state: [f64; 3],
    rng: ChaCha8Rng,
}

impl DisturbanceProcess {
    /// The Gauss–Markov part starts from its stationary distribution.
    pub fn new(spec: DisturbanceSpec, dt: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(DISTURBANCE_STREAM);
        let mut state = [0.0; 3];
        for (i, s) in state.iter_mut().enumerate() {
            let w: f64 = StandardNormal.sample(&mut rng);
            *s = spec.sigma[i] * w;
        }
        Self { spec, dt, state, rng }
    }

    /// Value over the current interval.
    pub fn current(&self) -> DisturbanceVector {
        let b = self.spec.bias;
        DisturbanceVector::new(b[0] + self.state[0], b[1] + self.state[1], b[2] + self.state[2])
    }

    /// Moves to the next grid point.
    pub fn advance(&mut self) {
        for i in 0..3 {
            let phi = (-self.dt / self.spec.time_constant[i]).exp();
            let w: f64 = StandardNormal.sample(&mut self.rng);
            self.state[i] = phi * self.state[i] + self.spec.sigma[i] * (1.0 - phi * phi).sqrt() * w;
        }
    }
}

pub(crate) const DISTURBANCE_STREAM: u64 = 0;
pub(crate) const UNCERTAINTY_STREAM: u64 = 1;
