//! Scenario description and the built-in presets.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{VesselParams, VesselState};
use crate::geometry::{Chart, ChartRegion, Point, Polygon};
use crate::guidance::{ApfConfig, Guidance, LosGuidance, ObstacleTrack};
use crate::nmpc::NmpcConfig;

use super::disturbance::DisturbanceSpec;
use super::pid::PidGains;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid scenario: {0}")]
pub struct ScenarioError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    #[default]
    Nmpc,
    NmpcNoObserver,
    Pid,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [ControllerKind::Pid, ControllerKind::NmpcNoObserver, ControllerKind::Nmpc];

    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::Nmpc => "nmpc",
            ControllerKind::NmpcNoObserver => "nmpc-no-observer",
            ControllerKind::Pid => "pid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselSpec {
    /// Rigid-body plus added mass, row-major.
    pub mass: [[f64; 3]; 3],
    pub linear_damping: [f64; 3],
    pub quadratic_damping: [f64; 3],
    /// Lower `[tau_u, tau_r]` bounds.
    pub input_lower: [f64; 2],
    pub input_upper: [f64; 2],
    pub max_yaw_rate: f64,
    pub draft: f64,
}

impl Default for VesselSpec {
    fn default() -> Self {
        Self::from_params(&VesselParams::default())
    }
}

impl VesselSpec {
    pub fn from_params(p: &VesselParams) -> Self {
        let m = p.mass();
        Self {
            mass: [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)])),
            linear_damping: p.linear_damping.into(),
            quadratic_damping: p.quadratic_damping.into(),
            input_lower: p.input_lower.into(),
            input_upper: p.input_upper.into(),
            max_yaw_rate: p.max_yaw_rate,
            draft: p.draft,
        }
    }

    pub fn params(&self) -> Result<VesselParams, ScenarioError> {
        let m = &self.mass;
        VesselParams::new(
            Matrix3::from_fn(|i, j| m[i][j]),
            Vector3::from(self.linear_damping),
            Vector3::from(self.quadratic_damping),
            Vector2::from(self.input_lower),
            Vector2::from(self.input_upper),
            self.max_yaw_rate,
            self.draft,
        )
        .map_err(|e| ScenarioError(format!("VesselParams: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
}

impl InitialState {
    pub fn state(&self) -> VesselState {
        VesselState::new(self.x, self.y, self.psi, self.u, self.v, self.r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSpec {
    pub waypoints: Vec<[f64; 2]>,
    /// Planned speed `u_sp` [m/s].
    pub speed: f64,
    pub lookahead: f64,
    pub acceptance_radius: f64,
}

impl Default for PathSpec {
    fn default() -> Self {
        Self { waypoints: vec![[0.0, 0.0], [2000.0, 0.0]], speed: 7.0, lookahead: 150.0, acceptance_radius: 50.0 }
    }
}

/// Potential-field settings; the reduced speeds default to half the planned speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApfSpec {
    pub eta: f64,
    pub d_safe: f64,
    pub r_safety: f64,
    pub r_grounding: f64,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_safety: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_grounding: Option<f64>,
    pub epsilon: f64,
    pub min_distance: f64,
}

impl Default for ApfSpec {
    fn default() -> Self {
        let c = ApfConfig::with_speed(1.0);
        Self {
            eta: c.eta,
            d_safe: c.d_safe,
            r_safety: c.r_safety,
            r_grounding: c.r_grounding,
            gamma: c.gamma,
            u_safety: None,
            u_grounding: None,
            epsilon: c.epsilon,
            min_distance: c.min_distance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub position: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    /// Water depth [m]; regions shallower than the draft are hazards.
    pub depth: f64,
    pub polygon: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub controller: ControllerKind,
    pub seed: u64,
    /// Simulated time [s]; the control period is `nmpc.dt`.
    pub duration: f64,
    /// Plant RK4 sub-steps per control period.
    pub plant_substeps: u32,
    /// Relative mismatch of the controller's mass and damping, in [0, 0.5].
    pub model_uncertainty: f64,
    pub collision_radius: f64,
    /// Required clearance from shallow water [m].
    pub grounding_margin: f64,
    pub vessel: VesselSpec,
    pub initial_state: InitialState,
    pub path: PathSpec,
    pub apf: ApfSpec,
    pub nmpc: NmpcConfig,
    pub pid: PidGains,
    pub disturbance: DisturbanceSpec,
    pub obstacles: Vec<ObstacleSpec>,
    pub chart: Vec<RegionSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            controller: ControllerKind::Nmpc,
            seed: 0,
            duration: 300.0,
            plant_substeps: 4,
            model_uncertainty: 0.0,
            collision_radius: 20.0,
            grounding_margin: 10.0,
            vessel: VesselSpec::default(),
            initial_state: InitialState { u: 7.0, ..InitialState::default() },
            path: PathSpec::default(),
            apf: ApfSpec::default(),
            nmpc: NmpcConfig::default(),
            pid: PidGains::default(),
            disturbance: DisturbanceSpec::none(),
            obstacles: Vec::new(),
            chart: Vec::new(),
        }
    }
}

fn point(p: &[f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

impl Scenario {
    pub fn params(&self) -> Result<VesselParams, ScenarioError> {
        self.vessel.params()
    }

    pub fn apf(&self) -> ApfConfig {
        let a = &self.apf;
        let u_sp = self.path.speed;
        ApfConfig {
            eta: a.eta,
            d_safe: a.d_safe,
            r_safety: a.r_safety,
            r_grounding: a.r_grounding,
            gamma: a.gamma,
            u_sp,
            u_safety: a.u_safety.unwrap_or(u_sp / 2.0),
            u_grounding: a.u_grounding.unwrap_or(u_sp / 2.0),
            epsilon: a.epsilon,
            min_distance: a.min_distance,
        }
    }

    pub fn waypoints(&self) -> Vec<Point> {
        self.path.waypoints.iter().map(point).collect()
    }

    pub fn los(&self) -> Result<LosGuidance, ScenarioError> {
        LosGuidance::new(self.waypoints(), self.path.lookahead, self.path.acceptance_radius).ok_or_else(|| {
            ScenarioError("path: needs at least two waypoints, lookahead > 0 and acceptance_radius >= 0".into())
        })
    }

    pub fn guidance(&self) -> Result<Guidance, ScenarioError> {
        Ok(Guidance::new(self.los()?, self.apf(), self.vessel.draft))
    }

    pub fn chart(&self) -> Chart {
        Chart::new(
            self.chart
                .iter()
                .map(|r| ChartRegion { depth: r.depth, polygon: Polygon::new(r.polygon.iter().map(point).collect()) })
                .collect(),
        )
    }

    /// Obstacle tracks at time `t` under constant-velocity motion.
    pub fn obstacles_at(&self, t: f64) -> Vec<ObstacleTrack> {
        self.obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let v = point(&o.velocity);
                ObstacleTrack::obstacle(i, point(&o.position) + v * t, v)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |m: &str| Err(ScenarioError(m.to_string()));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return fail("duration > 0 violated");
        }
        if !(0.0..=0.5).contains(&self.model_uncertainty) {
            return fail("model_uncertainty must lie in [0, 0.5]");
        }
        if self.seed > i64::MAX as u64 {
            return fail("seed must not exceed 2^63 - 1");
        }
        if self.plant_substeps == 0 {
            return fail("plant_substeps must be at least 1");
        }
        if !(self.collision_radius > 0.0 && self.collision_radius.is_finite()) {
            return fail("collision_radius must be positive");
        }
        if !(self.grounding_margin >= 0.0 && self.grounding_margin.is_finite()) {
            return fail("grounding_margin must be non-negative");
        }
        self.params()?;
        if !(self.path.speed > 0.0 && self.path.speed.is_finite()) {
            return fail("path.speed must be positive");
        }
        if self.path.waypoints.iter().flatten().any(|v| !v.is_finite()) {
            return fail("path waypoints must be finite");
        }
        self.los()?;
        self.apf().validate().map_err(|e| ScenarioError(format!("ApfConfig: {e}")))?;
        self.nmpc.validate().map_err(|e| ScenarioError(format!("NmpcConfig: {e}")))?;
        self.pid.validate().map_err(|e| ScenarioError(format!("PidGains: {e}")))?;
        self.disturbance.validate().map_err(ScenarioError)?;
        let init = &self.initial_state;
        if ![init.x, init.y, init.psi, init.u, init.v, init.r].iter().all(|v| v.is_finite()) {
            return fail("initial_state must be finite");
        }
        if self.obstacles.iter().any(|o| o.position.iter().chain(&o.velocity).any(|v| !v.is_finite())) {
            return fail("obstacle positions and velocities must be finite");
        }
        for r in &self.chart {
            if r.polygon.len() < 3 {
                return fail("chart polygons need at least three vertices");
            }
            if !r.depth.is_finite() || r.polygon.iter().flatten().any(|v| !v.is_finite()) {
                return fail("chart depths and vertices must be finite");
            }
        }
        Ok(())
    }
}

/// Encounter presets plus the combined run, as executed by `suite`.
pub const SUITE: [&str; 6] = ["head-on", "crossing", "overtaking", "isle-crossing", "crossing-disturbed", "combined"];

/// Every preset name, including the disturbance comparison setup.
pub const PRESETS: [&str; 7] =
    ["head-on", "crossing", "overtaking", "isle-crossing", "crossing-disturbed", "combined", "port-disturbance"];

fn island(x0: f64, x1: f64, y0: f64, y1: f64) -> RegionSpec {
    RegionSpec { depth: 0.5, polygon: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]] }
}

fn crossing_target() -> ObstacleSpec {
    ObstacleSpec { position: [1200.0, 850.0], velocity: [0.0, -5.0] }
}

impl Scenario {
    pub fn preset(name: &str) -> Option<Scenario> {
        let base = Scenario { name: name.to_string(), ..Scenario::default() };
        let straight = |len: f64| PathSpec { waypoints: vec![[0.0, 0.0], [len, 0.0]], ..PathSpec::default() };
        let s = match name {
            "head-on" => Scenario {
                duration: 420.0,
                path: straight(3500.0),
                obstacles: vec![ObstacleSpec { position: [2000.0, -15.0], velocity: [-5.0, 0.0] }],
                ..base
            },
            "crossing" => Scenario {
                duration: 420.0,
                path: straight(3500.0),
                obstacles: vec![crossing_target()],
                ..base
            },
            "overtaking" => Scenario {
                duration: 420.0,
                path: straight(3500.0),
                obstacles: vec![ObstacleSpec { position: [500.0, -10.0], velocity: [3.0, 0.0] }],
                ..base
            },
            "isle-crossing" => Scenario {
                duration: 380.0,
                path: straight(3000.0),
                chart: vec![
                    island(1200.0, 1500.0, 25.0, 400.0),
                    RegionSpec { depth: 4.0, polygon: vec![[1000.0, -300.0], [1700.0, -300.0], [1700.0, -120.0], [1000.0, -120.0]] },
                ],
                ..base
            },
            "crossing-disturbed" => Scenario {
                duration: 420.0,
                path: straight(3500.0),
                obstacles: vec![crossing_target()],
                disturbance: DisturbanceSpec::moderate(),
                model_uncertainty: 0.05,
                ..base
            },
            "combined" => Scenario {
                duration: 620.0,
                path: straight(4500.0),
                obstacles: vec![crossing_target()],
                chart: vec![island(2600.0, 2900.0, 25.0, 400.0)],
                disturbance: DisturbanceSpec::moderate(),
                model_uncertainty: 0.05,
                ..base
            },
            "port-disturbance" => Scenario {
                duration: 400.0,
                path: straight(3500.0),
                disturbance: DisturbanceSpec::port_side(),
                model_uncertainty: 0.05,
                ..base
            },
            _ => return None,
        };
        Some(s)
    }
}
