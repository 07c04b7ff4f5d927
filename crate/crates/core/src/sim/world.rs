//! Ground-truth world: own ship, constant-velocity targets and the chart.

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_step, ControlInput, DisturbanceVector, VesselParams, VesselState};
use crate::geometry::{Chart, Point};

use super::scenario::Scenario;

/// Condition that ends a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TerminalEvent {
    Collision { obstacle: usize },
    Grounded { region: usize },
    /// The plant integration produced a non-finite state.
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: f64,
    pub own: VesselState,
    pub event: Option<TerminalEvent>,
}

/// Immutable parts of the world.
#[derive(Debug, Clone)]
pub struct World {
    pub scenario: Scenario,
    /// True plant parameters.
    pub plant: VesselParams,
    pub chart: Chart,
}

impl World {
    pub fn new(scenario: Scenario, plant: VesselParams) -> Self {
        let chart = scenario.chart();
        Self { scenario, plant, chart }
    }

    pub fn obstacle_positions(&self, t: f64) -> Vec<Point> {
        self.scenario.obstacles_at(t).into_iter().map(|o| o.position).collect()
    }

    /// Range to the nearest target, `+inf` without targets.
    pub fn obstacle_distance(&self, own: &VesselState, t: f64) -> (f64, Option<usize>) {
        let p = own.position();
        self.obstacle_positions(t)
            .iter()
            .enumerate()
            .map(|(i, o)| ((p - o).norm(), Some(i)))
            .fold((f64::INFINITY, None), |a, b| if b.0 < a.0 { b } else { a })
    }

    /// Clearance to water shallower than the draft; zero when aground.
    pub fn grounding_distance(&self, own: &VesselState) -> f64 {
        self.chart
            .closest_grounding_point(&own.position(), self.plant.draft)
            .map_or(f64::INFINITY, |h| h.distance)
    }

    fn event(&self, own: &VesselState, t: f64) -> Option<TerminalEvent> {
        if let Some(region) = self.chart.grounded_in(&own.position(), self.plant.draft) {
            return Some(TerminalEvent::Grounded { region });
        }
        match self.obstacle_distance(own, t) {
            (d, Some(obstacle)) if d < self.scenario.collision_radius => Some(TerminalEvent::Collision { obstacle }),
            _ => None,
        }
    }

    pub fn initial(&self) -> WorldState {
        let own = self.scenario.initial_state.state();
        WorldState { t: 0.0, own, event: self.event(&own, 0.0) }
    }

    /// Advances by `dt` with the input and disturbance held constant.
    pub fn step(&self, state: &WorldState, input: &ControlInput, tau_d: &DisturbanceVector, dt: f64) -> WorldState {
        let n = self.scenario.plant_substeps.max(1);
        let h = dt / n as f64;
        let mut own = state.own;
        for _ in 0..n {
            match integrate_step(&own, input, tau_d, &self.plant, h) {
                Ok(next) => own = next,
                Err(_) => return WorldState { t: state.t, own: state.own, event: Some(TerminalEvent::Diverged) },
            }
        }
        let t = state.t + dt;
        WorldState { t, own, event: self.event(&own, t) }
    }
}
