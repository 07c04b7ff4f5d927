//! Nonlinear model predictive control by direct multiple shooting.

pub mod controller;
pub mod ocp;
pub mod qp;
pub mod sqp;

use nalgebra::{Vector3, Vector6};
use thiserror::Error;

use crate::ControlInput;

pub use controller::{ControllerDiagnostics, NmpcController};
pub use ocp::{build_ocp, state_error, NmpcConfig, OcpProblem, OcpWeights, StateBounds, Trajectory};
pub use sqp::{solve, solve_from};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OcpError {
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(String),
    #[error("OCP data must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverStatus {
    Converged,
    MaxIter,
    Infeasible,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIter => "max-iter",
            SolverStatus::Infeasible => "infeasible",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "converged" => Some(SolverStatus::Converged),
            "max-iter" => Some(SolverStatus::MaxIter),
            "infeasible" => Some(SolverStatus::Infeasible),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSolution {
    /// `N` inputs, always inside the input bounds.
    pub inputs: Vec<ControlInput>,
    /// `N + 1` predicted states; the heading is continuous, not wrapped.
    pub states: Vec<Vector6<f64>>,
    /// `N` slacks on the (ψ, u, r) errors.
    pub slacks: Vec<Vector3<f64>>,
    pub status: SolverStatus,
    pub objective: f64,
    /// Wall-clock solve time [s].
    pub solve_time: f64,
    pub iterations: usize,
    pub max_defect: f64,
    /// Relative stationarity at the last multiplier estimate.
    pub stationarity: f64,
}

impl OcpSolution {
    /// Plan advanced by one step with the last entries duplicated.
    pub fn shifted(&self) -> OcpSolution {
        fn shift<T: Copy>(v: &[T]) -> Vec<T> {
            let mut out: Vec<T> = v.iter().skip(1).copied().collect();
            if let Some(last) = v.last() {
                out.push(*last);
            }
            out
        }
        OcpSolution {
            inputs: shift(&self.inputs),
            states: shift(&self.states),
            slacks: shift(&self.slacks),
            ..self.clone()
        }
    }

    /// Equality of everything except the wall-clock time.
    pub fn same_plan(&self, other: &OcpSolution) -> bool {
        OcpSolution { solve_time: 0.0, ..self.clone() } == OcpSolution { solve_time: 0.0, ..other.clone() }
    }
}
