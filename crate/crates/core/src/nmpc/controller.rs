//! Per-period composition of observer, guidance and OCP solve.

use thiserror::Error;

use crate::dynamics::{ControlInput, DisturbanceVector, VesselParams, VesselState};
use crate::geometry::Chart;
use crate::guidance::{Guidance, GuidanceCommand, LosOutput, ObstacleTrack};
use crate::observer::{build_gains, observer_step, ObserverError, ObserverGains, ObserverState};

use super::ocp::{build_ocp, NmpcConfig, OcpWeights};
use super::{sqp, OcpError, OcpSolution, SolverStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error(transparent)]
    Config(#[from] OcpError),
    #[error(transparent)]
    Observer(#[from] ObserverError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerDiagnostics {
    pub command: GuidanceCommand,
    pub los: LosOutput,
    pub tau_d_hat: DisturbanceVector,
    pub status: SolverStatus,
    pub iterations: usize,
    pub solve_time: f64,
    pub objective: f64,
    /// The applied input came from the previous plan, not a fresh solve.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct NmpcController {
    pub config: NmpcConfig,
    pub guidance: Guidance,
    /// The controller's copy of the vessel model.
    model: VesselParams,
    gains: Option<ObserverGains>,
    observer: Option<ObserverState>,
    plan: Option<OcpSolution>,
    last_input: ControlInput,
}

impl NmpcController {
    /// `use_observer = false` feeds a zero disturbance to the OCP.
    pub fn new(config: NmpcConfig, guidance: Guidance, model: VesselParams, use_observer: bool) -> Result<Self, ControllerError> {
        config.validate()?;
        let gains = if use_observer {
            let g = build_gains(&model, config.observer_gain)?;
            g.check_discrete_stability(config.dt)?;
            Some(g)
        } else {
            None
        };
        Ok(Self { config, guidance, model, gains, observer: None, plan: None, last_input: ControlInput::default() })
    }

    pub fn plan(&self) -> Option<&OcpSolution> {
        self.plan.as_ref()
    }

    pub fn observer(&self) -> Option<&ObserverState> {
        self.observer.as_ref()
    }

    fn estimate(&mut self, x: &VesselState) -> DisturbanceVector {
        let Some(gains) = &self.gains else {
            return DisturbanceVector::ZERO;
        };
        let nu = x.nu();
        let next = match &self.observer {
            None => Some(ObserverState::new(&nu, gains)),
            Some(obs) => observer_step(obs, &nu, &self.last_input, gains, &self.model, self.config.dt).ok(),
        };
        // A faulted update keeps the last estimate.
        if let Some(obs) = next {
            self.observer = Some(obs);
        }
        self.observer.as_ref().map(|o| o.estimate()).unwrap_or(DisturbanceVector::ZERO)
    }

    /// One control period: returns the input to apply until the next call.
    pub fn step(&mut self, x: &VesselState, obstacles: &[ObstacleTrack], chart: &Chart) -> (ControlInput, ControllerDiagnostics) {
        let tau_d_hat = self.estimate(x);
        let (command, los) = self.guidance.command(x, obstacles, chart);
        let weights = OcpWeights::from_config(&self.config, command.mu);
        let solution = build_ocp(x, &command, &tau_d_hat, &weights, &self.model, &self.config, self.guidance.apf.u_sp)
            .ok()
            .map(|problem| sqp::solve(&problem, self.plan.as_ref()));

        let mut diag = ControllerDiagnostics {
            command,
            los,
            tau_d_hat,
            status: solution.as_ref().map_or(SolverStatus::Infeasible, |s| s.status),
            iterations: solution.as_ref().map_or(0, |s| s.iterations),
            solve_time: solution.as_ref().map_or(0.0, |s| s.solve_time),
            objective: solution.as_ref().map_or(f64::NAN, |s| s.objective),
            fallback: false,
        };

        let input = match solution {
            Some(sol) if sol.status == SolverStatus::Converged => {
                let u = sol.inputs[0];
                self.plan = Some(sol);
                u
            }
            other => {
                diag.fallback = true;
                match self.plan.take() {
                    Some(prev) => {
                        let shifted = prev.shifted();
                        let u = shifted.inputs[0];
                        self.plan = Some(shifted);
                        u
                    }
                    None => {
                        let candidate = other.and_then(|s| s.inputs.first().copied().filter(|u| u.is_finite()).map(|u| (u, s)));
                        match candidate {
                            Some((u, s)) => {
                                self.plan = Some(s);
                                u
                            }
                            None => ControlInput::default(),
                        }
                    }
                }
            }
        };
        let input = if input.is_finite() { input } else { ControlInput::default() };
        let input = input.clamped(&self.model.input_lower, &self.model.input_upper);
        self.last_input = input;
        (input, diag)
    }
}
