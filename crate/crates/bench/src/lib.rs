//! Shared inputs for the solver benchmarks.

use seanav::guidance::{GuidanceCommand, GuidanceMode};
use seanav::nmpc::{build_ocp, NmpcConfig, OcpProblem, OcpWeights};
use seanav::{DisturbanceVector, VesselParams, VesselState};

/// OCP at the start of a 0.6 rad heading change with a disturbance estimate.
pub fn turning_problem(horizon: usize) -> OcpProblem {
    let cfg = NmpcConfig { horizon, ..NmpcConfig::default() };
    let cmd = GuidanceCommand { psi_des: 0.6, u_des: 5.0, mu: 0.5, alpha: 0.0, mode: GuidanceMode::Colav, d_min: 150.0 };
    let x0 = VesselState::new(0.0, 0.0, 0.0, 7.0, 0.1, 0.0);
    let d = DisturbanceVector::new(-100.0, 300.0, 800.0);
    let w = OcpWeights::from_config(&cfg, cmd.mu);
    build_ocp(&x0, &cmd, &d, &w, &VesselParams::default(), &cfg, 7.0).expect("benchmark problem is valid")
}
