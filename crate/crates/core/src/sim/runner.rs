//! Closed-loop execution and run metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::dynamics::{ControlInput, DisturbanceVector, VesselParams, VesselState};
use crate::geometry::Point;
use crate::guidance::{Guidance, GuidanceCommand};
use crate::nmpc::{NmpcController, SolverStatus};

use super::disturbance::{DisturbanceProcess, UNCERTAINTY_STREAM};
use super::pid::{pid_baseline, PidState};
use super::scenario::{ControllerKind, Scenario, ScenarioError};
use super::world::{TerminalEvent, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Record wall-clock solve times. Off by default so that output is
    /// reproducible.
    pub timing: bool,
}

/// One control period.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub state: VesselState,
    pub input: ControlInput,
    pub tau_d: DisturbanceVector,
    pub tau_d_hat: DisturbanceVector,
    pub command: GuidanceCommand,
    /// Signed cross-track error against the active segment.
    pub cross_track: f64,
    pub segment: usize,
    /// True range to the nearest target, `+inf` without targets.
    pub obstacle_distance: f64,
    /// True clearance to shallow water, `+inf` without hazards.
    pub grounding_distance: f64,
    pub obstacles: Vec<Point>,
    /// Wall-clock solve time [s], NaN unless timing is enabled.
    pub solve_time: f64,
    /// `None` for the PID baseline.
    pub status: Option<SolverStatus>,
    pub iterations: usize,
    pub fallback: bool,
}

/// Summary numbers; every field is `None` for an empty run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub steps: Option<usize>,
    pub final_time: Option<f64>,
    pub event: Option<TerminalEvent>,
    pub min_obstacle_distance: Option<f64>,
    pub min_grounding_distance: Option<f64>,
    pub rms_cross_track: Option<f64>,
    pub max_cross_track: Option<f64>,
    pub terminal_cross_track: Option<f64>,
    pub surge_at_closest_approach: Option<f64>,
    /// Every target that came inside the safety radius stayed on the port
    /// side around its closest approach.
    pub port_side_pass: Option<bool>,
    pub mean_solve_time: Option<f64>,
    pub max_solve_time: Option<f64>,
    pub fallback_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub scenario: Scenario,
    pub records: Vec<StepRecord>,
    pub event: Option<TerminalEvent>,
    pub metrics: RunMetrics,
}

impl RunResult {
    pub fn new(scenario: Scenario, records: Vec<StepRecord>, event: Option<TerminalEvent>) -> Self {
        let metrics = compute_metrics(&scenario, &records, event);
        Self { scenario, records, event, metrics }
    }

    pub fn recompute_metrics(&self) -> RunMetrics {
        compute_metrics(&self.scenario, &self.records, self.event)
    }

    /// Directory name unique per scenario, controller and seed.
    pub fn dir_name(&self) -> String {
        run_dir_name(&self.scenario)
    }
}

pub fn run_dir_name(s: &Scenario) -> String {
    format!("{}_{}_seed{}", s.name, s.controller.as_str(), s.seed)
}

/// Closest-approach window: samples within this factor of the minimum range.
const PASS_WINDOW: f64 = 1.25;

fn finite_min(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.filter(|v| v.is_finite()).fold(None, |m, v| Some(m.map_or(v, |m: f64| m.min(v))))
}

pub fn compute_metrics(scenario: &Scenario, records: &[StepRecord], event: Option<TerminalEvent>) -> RunMetrics {
    let Some(last) = records.last() else {
        return RunMetrics::default();
    };
    let n = records.len();
    let rms = (records.iter().map(|r| r.cross_track * r.cross_track).sum::<f64>() / n as f64).sqrt();
    let max_ct = records.iter().map(|r| r.cross_track.abs()).fold(0.0, f64::max);
    let times: Vec<f64> = records.iter().map(|r| r.solve_time).filter(|t| t.is_finite()).collect();

    let closest = records
        .iter()
        .filter(|r| r.obstacle_distance.is_finite())
        .min_by(|a, b| a.obstacle_distance.total_cmp(&b.obstacle_distance));

    RunMetrics {
        steps: Some(n),
        final_time: Some(last.t),
        event,
        min_obstacle_distance: closest.map(|r| r.obstacle_distance),
        min_grounding_distance: finite_min(records.iter().map(|r| r.grounding_distance)),
        rms_cross_track: Some(rms),
        max_cross_track: Some(max_ct),
        terminal_cross_track: Some(last.cross_track.abs()),
        surge_at_closest_approach: closest.map(|r| r.state.u),
        port_side_pass: port_side_pass(scenario, records),
        mean_solve_time: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
        max_solve_time: times.iter().copied().reduce(f64::max),
        fallback_steps: Some(records.iter().filter(|r| r.fallback).count()),
    }
}

/// Relative bearing of `target` from the vessel; negative is to port.
pub fn relative_bearing(state: &VesselState, target: &Point) -> f64 {
    let d = target - state.position();
    angle::diff(d.y.atan2(d.x), state.psi)
}

fn port_side_pass(scenario: &Scenario, records: &[StepRecord]) -> Option<bool> {
    let r_safety = scenario.apf().r_safety;
    let mut verdict = None;
    for i in 0..scenario.obstacles.len() {
        let range = |r: &StepRecord| (r.obstacles[i] - r.state.position()).norm();
        let d_min = records.iter().map(range).fold(f64::INFINITY, f64::min);
        if !(d_min <= r_safety) {
            continue;
        }
        let port = records
            .iter()
            .filter(|r| range(r) <= PASS_WINDOW * d_min)
            .all(|r| relative_bearing(&r.state, &r.obstacles[i]) < 0.0);
        verdict = Some(verdict.unwrap_or(true) && port);
    }
    verdict
}

enum Controller {
    Nmpc(Box<NmpcController>),
    Pid { guidance: Guidance, state: PidState },
}

struct Output {
    input: ControlInput,
    command: GuidanceCommand,
    cross_track: f64,
    segment: usize,
    tau_d_hat: DisturbanceVector,
    solve_time: f64,
    status: Option<SolverStatus>,
    iterations: usize,
    fallback: bool,
}

/// Controller-side model: mass and damping each scaled by `1 ± factor`
/// with signs drawn once per run.
pub fn controller_model(plant: &VesselParams, factor: f64, seed: u64) -> Result<VesselParams, ScenarioError> {
    if factor == 0.0 {
        return Ok(plant.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(UNCERTAINTY_STREAM);
    let mut sign = || if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let (sm, sd) = (sign(), sign());
    plant
        .scaled(1.0 + sm * factor, 1.0 + sd * factor)
        .map_err(|e| ScenarioError(format!("VesselParams (scaled): {e}")))
}

pub fn run_scenario(scenario: &Scenario) -> Result<RunResult, ScenarioError> {
    run_scenario_with(scenario, RunOptions::default())
}

pub fn run_scenario_with(scenario: &Scenario, options: RunOptions) -> Result<RunResult, ScenarioError> {
    scenario.validate()?;
    let plant = scenario.params()?;
    let model = controller_model(&plant, scenario.model_uncertainty, scenario.seed)?;
    let guidance = scenario.guidance()?;
    let dt = scenario.nmpc.dt;
    let mut controller = match scenario.controller {
        ControllerKind::Pid => Controller::Pid { guidance, state: PidState::default() },
        kind => {
            let c = NmpcController::new(scenario.nmpc, guidance, model.clone(), kind == ControllerKind::Nmpc)
                .map_err(|e| ScenarioError(format!("controller: {e}")))?;
            Controller::Nmpc(Box::new(c))
        }
    };

    let world = World::new(scenario.clone(), plant);
    let mut disturbance = DisturbanceProcess::new(scenario.disturbance, dt, scenario.seed);
    let steps = (scenario.duration / dt + 1e-9).floor() as usize;
    let mut state = world.initial();
    let mut records = Vec::with_capacity(steps + 1);

    for k in 0..=steps {
        let t = state.t;
        let tracks = scenario.obstacles_at(t);
        let out = match &mut controller {
            Controller::Nmpc(c) => {
                let (input, diag) = c.step(&state.own, &tracks, &world.chart);
                Output {
                    input,
                    command: diag.command,
                    cross_track: diag.los.cross_track,
                    segment: diag.los.segment,
                    tau_d_hat: diag.tau_d_hat,
                    solve_time: if options.timing { diag.solve_time } else { f64::NAN },
                    status: Some(diag.status),
                    iterations: diag.iterations,
                    fallback: diag.fallback,
                }
            }
            Controller::Pid { guidance, state: pid } => {
                let (command, los) = guidance.command(&state.own, &tracks, &world.chart);
                let input = pid_baseline(&state.own, &command, &scenario.pid, pid, &model, dt);
                Output {
                    input,
                    command,
                    cross_track: los.cross_track,
                    segment: los.segment,
                    tau_d_hat: DisturbanceVector::ZERO,
                    solve_time: f64::NAN,
                    status: None,
                    iterations: 0,
                    fallback: false,
                }
            }
        };
        let tau_d = disturbance.current();
        records.push(StepRecord {
            t,
            state: state.own,
            input: out.input,
            tau_d,
            tau_d_hat: out.tau_d_hat,
            command: out.command,
            cross_track: out.cross_track,
            segment: out.segment,
            obstacle_distance: world.obstacle_distance(&state.own, t).0,
            grounding_distance: world.grounding_distance(&state.own),
            obstacles: tracks.iter().map(|o| o.position).collect(),
            solve_time: out.solve_time,
            status: out.status,
            iterations: out.iterations,
            fallback: out.fallback,
        });
        if state.event.is_some() || k == steps {
            break;
        }
        state = world.step(&state, &out.input, &tau_d, dt);
        disturbance.advance();
    }

    let event = state.event;
    Ok(RunResult::new(scenario.clone(), records, event))
}
