//! Desired heading and surge from potential fields blended with LOS.

pub mod apf;
pub mod los;

use crate::angle;
use crate::dynamics::VesselState;
use crate::geometry::Chart;
pub use apf::{aggregate_forces, ApfConfig, ForceSummary, ObstacleTrack, TrackKind};
pub use los::{LosGuidance, LosOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GuidanceMode {
    PathFollow,
    Colav,
    AntiGrounding,
}

impl GuidanceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GuidanceMode::PathFollow => "path-follow",
            GuidanceMode::Colav => "colav",
            GuidanceMode::AntiGrounding => "anti-grounding",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "path-follow" => Some(GuidanceMode::PathFollow),
            "colav" => Some(GuidanceMode::Colav),
            "anti-grounding" => Some(GuidanceMode::AntiGrounding),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceCommand {
    pub psi_des: f64,
    pub u_des: f64,
    pub mu: f64,
    pub alpha: f64,
    pub mode: GuidanceMode,
    /// Distance to the closest hazard, `+inf` when nothing is tracked.
    pub d_min: f64,
}

impl GuidanceCommand {
    /// Plain path following toward `psi_los` at the planned speed.
    pub fn path_follow(psi_los: f64, cfg: &ApfConfig) -> Self {
        Self {
            psi_des: angle::wrap(psi_los),
            u_des: cfg.u_sp,
            mu: 0.0,
            alpha: 0.0,
            mode: GuidanceMode::PathFollow,
            d_min: f64::INFINITY,
        }
    }
}

/// `psi_los + w · wrap(target − psi_los)`: the convex blend taken along the
/// shorter arc.
fn blend_heading(target: f64, psi_los: f64, weight: f64) -> f64 {
    angle::wrap(psi_los + weight * angle::diff(target, psi_los))
}

fn blend_weight(d_min: f64, radius: f64) -> Option<f64> {
    (d_min <= radius).then(|| 1.0 - d_min / radius)
}

/// Starboard-sliding heading inside the safety radius.
pub fn colav_heading(alpha: f64, d_min: f64, psi_los: f64, cfg: &ApfConfig) -> f64 {
    match blend_weight(d_min, cfg.r_safety) {
        Some(w) => blend_heading(alpha - cfg.gamma, psi_los, w),
        None => angle::wrap(psi_los),
    }
}

pub fn colav_speed(d_min: f64, cfg: &ApfConfig) -> f64 {
    match blend_weight(d_min, cfg.r_safety) {
        Some(w) => w * cfg.u_safety + (1.0 - w) * cfg.u_sp,
        None => cfg.u_sp,
    }
}

/// Same scheme as [`colav_heading`] without the starboard offset.
pub fn grounding_heading(alpha: f64, d_min: f64, psi_los: f64, cfg: &ApfConfig) -> f64 {
    match blend_weight(d_min, cfg.r_grounding) {
        Some(w) => blend_heading(alpha, psi_los, w),
        None => angle::wrap(psi_los),
    }
}

pub fn grounding_speed(d_min: f64, cfg: &ApfConfig) -> f64 {
    match blend_weight(d_min, cfg.r_grounding) {
        Some(w) => w * cfg.u_grounding + (1.0 - w) * cfg.u_sp,
        None => cfg.u_sp,
    }
}

/// Mode arbitration and blending.
///
/// The closest track picks the mode. Anti-grounding needs the closest track
/// to be a grounding point inside `r_grounding`. Collision avoidance runs
/// whenever an obstacle is inside `r_safety` and anti-grounding is not
/// active, using that obstacle's distance in the blend.
pub fn guidance_command(forces: &ForceSummary, psi_los: f64, cfg: &ApfConfig) -> GuidanceCommand {
    let base = GuidanceCommand {
        mu: forces.mu,
        alpha: forces.alpha,
        d_min: forces.d_min,
        ..GuidanceCommand::path_follow(psi_los, cfg)
    };
    let grounding_active =
        forces.closest_kind == Some(TrackKind::GroundingPoint) && forces.nearest_grounding <= cfg.r_grounding;
    if grounding_active {
        let d = forces.nearest_grounding;
        return GuidanceCommand {
            psi_des: grounding_heading(forces.alpha, d, psi_los, cfg),
            u_des: grounding_speed(d, cfg),
            mode: GuidanceMode::AntiGrounding,
            ..base
        };
    }
    if forces.nearest_obstacle <= cfg.r_safety {
        let d = forces.nearest_obstacle;
        return GuidanceCommand {
            psi_des: colav_heading(forces.alpha, d, psi_los, cfg),
            u_des: colav_speed(d, cfg),
            mode: GuidanceMode::Colav,
            ..base
        };
    }
    base
}

/// Dynamic obstacles plus the closest grounding point for the given draft.
pub fn hazard_tracks(position: &crate::geometry::Point, obstacles: &[ObstacleTrack], chart: &Chart, draft: f64) -> Vec<ObstacleTrack> {
    let mut tracks = obstacles.to_vec();
    if let Some(hit) = chart.closest_grounding_point(position, draft) {
        tracks.push(ObstacleTrack::grounding(obstacles.len(), hit.point));
    }
    tracks
}

/// LOS path following with the potential-field layer on top.
#[derive(Debug, Clone, PartialEq)]
pub struct Guidance {
    pub los: LosGuidance,
    pub apf: ApfConfig,
    pub draft: f64,
}

impl Guidance {
    pub fn new(los: LosGuidance, apf: ApfConfig, draft: f64) -> Self {
        Self { los, apf, draft }
    }

    pub fn command(&mut self, x: &VesselState, obstacles: &[ObstacleTrack], chart: &Chart) -> (GuidanceCommand, LosOutput) {
        let p = x.position();
        let los = self.los.update(&p);
        let tracks = hazard_tracks(&p, obstacles, chart, self.draft);
        let forces = aggregate_forces(&p, &tracks, &self.apf);
        (guidance_command(&forces, los.psi_los, &self.apf), los)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use nalgebra::Vector2;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

    fn cfg() -> ApfConfig {
        ApfConfig::with_speed(7.0)
    }

    #[test]
    fn colav_heading_examples() {
        let c = cfg();
        assert_eq!(colav_heading(1.0, c.r_safety + 1.0, 0.3, &c), 0.3);
        assert!((colav_heading(FRAC_PI_2, 0.0, 1.2, &c) - FRAC_PI_4).abs() < 1e-15);
        assert!((colav_heading(FRAC_PI_2, c.r_safety / 2.0, 0.0, &c) - FRAC_PI_8).abs() < 1e-15);
    }

    #[test]
    fn speed_examples() {
        let c = cfg();
        assert_eq!(c.u_safety, 3.5);
        assert_eq!(colav_speed(0.0, &c), c.u_safety);
        assert!((colav_speed(c.r_safety / 2.0, &c) - 5.25).abs() < 1e-15);
        assert_eq!(grounding_speed(0.0, &c), c.u_grounding);
        assert_eq!(grounding_speed(c.r_grounding, &c), c.u_sp);
        let mid = grounding_speed(c.r_grounding / 2.0, &c);
        assert!((mid - 0.5 * (c.u_grounding + c.u_sp)).abs() < 1e-15);
    }

    #[test]
    fn grounding_heading_examples() {
        let c = cfg();
        assert_eq!(grounding_heading(2.0, c.r_grounding, -0.4, &c), -0.4);
        assert!((grounding_heading(2.0, 0.0, -0.4, &c) - 2.0).abs() < 1e-15);
        assert!((grounding_heading(1.0, c.r_grounding / 2.0, 0.0, &c) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn blend_takes_the_short_arc() {
        let c = cfg();
        // α − γ just across the wrap from ψ_LOS.
        let psi = colav_heading(-PI + 0.1 + c.gamma, 0.0, PI - 0.1, &c);
        assert!((psi - (-PI + 0.1)).abs() < 1e-12);
        let half = colav_heading(-PI + 0.1 + c.gamma, c.r_safety / 2.0, PI - 0.1, &c);
        assert!((half - PI).abs() < 1e-12);
    }

    #[test]
    fn head_on_turns_to_starboard() {
        // North-east frame: a positive heading change is a starboard turn.
        let c = cfg();
        let tracks = [ObstacleTrack::obstacle(0, Point::new(200.0, 0.0), Vector2::new(-5.0, 0.0))];
        let forces = aggregate_forces(&Point::zeros(), &tracks, &c);
        let cmd = guidance_command(&forces, 0.0, &c);
        assert_eq!(cmd.mode, GuidanceMode::Colav);
        assert!(cmd.psi_des > 0.0);
        assert!(cmd.u_des < c.u_sp);
    }

    #[test]
    fn mode_arbitration() {
        let c = cfg();
        let p = Point::zeros();
        let far = [ObstacleTrack::obstacle(0, Point::new(450.0, 0.0), Vector2::zeros())];
        assert_eq!(guidance_command(&aggregate_forces(&p, &far, &c), 0.0, &c).mode, GuidanceMode::PathFollow);

        let shore_close = [
            ObstacleTrack::obstacle(0, Point::new(250.0, 0.0), Vector2::zeros()),
            ObstacleTrack::grounding(1, Point::new(0.0, 150.0)),
        ];
        assert_eq!(guidance_command(&aggregate_forces(&p, &shore_close, &c), 0.0, &c).mode, GuidanceMode::AntiGrounding);

        // Nearest is a grounding point outside r_grounding; an obstacle inside r_safety still triggers COLAV.
        let shore_far = [
            ObstacleTrack::obstacle(0, Point::new(280.0, 0.0), Vector2::zeros()),
            ObstacleTrack::grounding(1, Point::new(0.0, 250.0)),
        ];
        let cmd = guidance_command(&aggregate_forces(&p, &shore_far, &c), 0.0, &c);
        assert_eq!(cmd.mode, GuidanceMode::Colav);
        assert_eq!(cmd.d_min, 250.0);

        // Nearest is an obstacle (not triggered); the grounding point never takes over.
        let c2 = ApfConfig { r_safety: 100.0, r_grounding: 400.0, ..c };
        let tracks = [
            ObstacleTrack::obstacle(0, Point::new(200.0, 0.0), Vector2::zeros()),
            ObstacleTrack::grounding(1, Point::new(0.0, 300.0)),
        ];
        assert_eq!(guidance_command(&aggregate_forces(&p, &tracks, &c2), 0.0, &c2).mode, GuidanceMode::PathFollow);
    }
}
