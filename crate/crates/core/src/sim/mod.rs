//! Closed-loop simulation: scenarios, ground-truth world, disturbances and
//! the PID baseline.

pub mod disturbance;
pub mod pid;
pub mod runner;
pub mod scenario;
pub mod world;

pub use disturbance::{DisturbanceProcess, DisturbanceSpec};
pub use pid::{pid_baseline, PidGains, PidState};
pub use runner::{run_dir_name, run_scenario, run_scenario_with, RunMetrics, RunOptions, RunResult, StepRecord};
pub use scenario::{ControllerKind, Scenario, ScenarioError, PRESETS, SUITE};
pub use world::{TerminalEvent, World, WorldState};
