//! Closed-loop navigation toolkit for autonomous surface vessels.
//!
//! The crate is organised bottom-up:
//!
//! - [`dynamics`]: 3-DOF vessel kinematics and kinetics, RK4 integration and
//!   the exact Jacobians of the discrete step.
//! - [`observer`]: nonlinear disturbance observer with exponentially stable
//!   error dynamics.
//! - [`geometry`]: polygon utilities and depth-attributed charts.
//! - [`guidance`]: potential-field collision avoidance / anti-grounding on
//!   top of line-of-sight path following.
//! - [`nmpc`]: direct multiple shooting transcription solved by SQP with a
//!   structured interior-point QP, plus the per-period controller.
//! - [`sim`]: scenarios, disturbance generation, PID baseline and the batch
//!   runner.
//! - [`io`]: scenario files and run output.

// Negated comparisons double as NaN rejection in validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod dynamics;
pub mod geometry;
pub mod guidance;
pub mod io;
pub mod nmpc;
pub mod observer;
pub mod sim;

pub use dynamics::{ControlInput, DisturbanceVector, VesselParams, VesselState};
pub use guidance::{GuidanceCommand, GuidanceMode};
pub use nmpc::{OcpSolution, SolverStatus};
pub use observer::{ObserverGains, ObserverState};
pub use sim::{RunResult, Scenario};
