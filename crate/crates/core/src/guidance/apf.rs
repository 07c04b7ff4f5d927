//! Artificial potential fields.

use nalgebra::Vector2;
use thiserror::Error;

use crate::geometry::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApfError {
    #[error("position coincides with the obstacle; the field is singular there")]
    Coincident,
    #[error("invalid potential-field configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackKind {
    DynamicObstacle,
    GroundingPoint,
}

/// A tracked hazard. Guidance uses only the position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleTrack {
    pub id: usize,
    pub position: Point,
    pub velocity: Vector2<f64>,
    pub kind: TrackKind,
}

impl ObstacleTrack {
    pub fn obstacle(id: usize, position: Point, velocity: Vector2<f64>) -> Self {
        Self { id, position, velocity, kind: TrackKind::DynamicObstacle }
    }

    pub fn grounding(id: usize, position: Point) -> Self {
        Self { id, position, velocity: Vector2::zeros(), kind: TrackKind::GroundingPoint }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApfConfig {
    /// Repulsive coefficient.
    pub eta: f64,
    /// Tracking radius; hazards further away exert no force [m].
    pub d_safe: f64,
    /// Collision avoidance trigger radius [m].
    pub r_safety: f64,
    /// Anti-grounding trigger radius [m].
    pub r_grounding: f64,
    /// Starboard sliding offset [rad].
    pub gamma: f64,
    /// Planned speed [m/s].
    pub u_sp: f64,
    /// Speed near obstacles [m/s].
    pub u_safety: f64,
    /// Speed near grounding hazards [m/s].
    pub u_grounding: f64,
    /// Attractive coefficient.
    pub epsilon: f64,
    /// Distances below this are clamped before the `1/d` terms [m].
    pub min_distance: f64,
}

impl ApfConfig {
    /// Defaults for a planned speed `u_sp`; both reduced speeds are `u_sp / 2`.
    pub fn with_speed(u_sp: f64) -> Self {
        Self {
            eta: 1.0,
            d_safe: 500.0,
            r_safety: 300.0,
            r_grounding: 200.0,
            gamma: std::f64::consts::FRAC_PI_4,
            u_sp,
            u_safety: u_sp / 2.0,
            u_grounding: u_sp / 2.0,
            epsilon: 1.0,
            min_distance: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), ApfError> {
        let fail = |m: &str| Err(ApfError::InvalidConfig(m.to_string()));
        if !(self.eta > 0.0) {
            return fail("eta must be positive");
        }
        if !(self.r_safety > 0.0 && self.r_safety <= self.d_safe) {
            return fail("0 < r_safety <= d_safe violated");
        }
        if !(self.r_grounding > 0.0 && self.r_grounding <= self.d_safe) {
            return fail("0 < r_grounding <= d_safe violated");
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&self.gamma) {
            return fail("gamma must lie in [0, pi/2]");
        }
        if !(self.u_sp > 0.0 && self.u_safety > 0.0 && self.u_grounding > 0.0) {
            return fail("speeds must be positive");
        }
        if !(self.epsilon > 0.0) {
            return fail("epsilon must be positive");
        }
        if !(self.min_distance > 0.0 && self.min_distance < self.d_safe) {
            return fail("0 < min_distance < d_safe violated");
        }
        Ok(())
    }
}

fn separation(q: &Point, q_obs: &Point) -> Result<(Vector2<f64>, f64), ApfError> {
    let delta = q - q_obs;
    let d = delta.norm();
    if d == 0.0 {
        Err(ApfError::Coincident)
    } else {
        Ok((delta, d))
    }
}

/// `½ η (1/d − 1/d_safe)²` inside the tracking radius, zero outside.
pub fn repulsive_potential(q: &Point, q_obs: &Point, cfg: &ApfConfig) -> Result<f64, ApfError> {
    let (_, d) = separation(q, q_obs)?;
    if d >= cfg.d_safe {
        return Ok(0.0);
    }
    let d = d.max(cfg.min_distance);
    let g = 1.0 / d - 1.0 / cfg.d_safe;
    Ok(0.5 * cfg.eta * g * g)
}

/// Negative gradient of [`repulsive_potential`]; points away from the obstacle.
pub fn repulsive_force(q: &Point, q_obs: &Point, cfg: &ApfConfig) -> Result<Vector2<f64>, ApfError> {
    let (delta, d) = separation(q, q_obs)?;
    if d >= cfg.d_safe {
        return Ok(Vector2::zeros());
    }
    let dc = d.max(cfg.min_distance);
    Ok(delta * (cfg.eta * (1.0 / dc - 1.0 / cfg.d_safe) / (dc * dc * dc)))
}

/// `½ ε |q − q_goal|²`. Not used by the controller, which follows the path
/// through line-of-sight guidance instead.
pub fn attractive_potential(q: &Point, q_goal: &Point, cfg: &ApfConfig) -> f64 {
    0.5 * cfg.epsilon * (q - q_goal).norm_squared()
}

pub fn attractive_force(q: &Point, q_goal: &Point, cfg: &ApfConfig) -> Vector2<f64> {
    cfg.epsilon * (q_goal - q)
}

/// Resultant of all hazards inside the tracking radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceSummary {
    pub force: Vector2<f64>,
    pub mu: f64,
    pub alpha: f64,
    /// Distance to the nearest in-range track, `+inf` when none.
    pub d_min: f64,
    pub closest_kind: Option<TrackKind>,
    pub nearest_obstacle: f64,
    pub nearest_grounding: f64,
}

pub fn aggregate_forces(q: &Point, tracks: &[ObstacleTrack], cfg: &ApfConfig) -> ForceSummary {
    let mut force = Vector2::zeros();
    let mut nearest_obstacle = f64::INFINITY;
    let mut nearest_grounding = f64::INFINITY;
    for track in tracks {
        let d = (q - track.position).norm();
        if d >= cfg.d_safe {
            continue;
        }
        // A coincident track contributes no direction, only its distance.
        if let Ok(f) = repulsive_force(q, &track.position, cfg) {
            force += f;
        }
        match track.kind {
            TrackKind::DynamicObstacle => nearest_obstacle = nearest_obstacle.min(d),
            TrackKind::GroundingPoint => nearest_grounding = nearest_grounding.min(d),
        }
    }
    // Ties go to grounding: the shore cannot manoeuvre.
    let (d_min, closest_kind) = if nearest_grounding.is_finite() && nearest_grounding <= nearest_obstacle {
        (nearest_grounding, Some(TrackKind::GroundingPoint))
    } else if nearest_obstacle.is_finite() {
        (nearest_obstacle, Some(TrackKind::DynamicObstacle))
    } else {
        (f64::INFINITY, None)
    };
    ForceSummary {
        force,
        mu: force.norm(),
        alpha: force.y.atan2(force.x),
        d_min,
        closest_kind,
        nearest_obstacle,
        nearest_grounding,
    }
}
