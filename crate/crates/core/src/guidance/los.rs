//! Lookahead-based line-of-sight path following.

use crate::angle;
use crate::geometry::Point;

/// Along-track and cross-track coordinates of a point relative to a segment.
/// Cross-track is positive to starboard of the segment direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentFrame {
    pub course: f64,
    pub along_track: f64,
    pub cross_track: f64,
    pub length: f64,
}

pub fn segment_frame(p: &Point, from: &Point, to: &Point) -> SegmentFrame {
    let d = to - from;
    let course = d.y.atan2(d.x);
    let (s, c) = course.sin_cos();
    let rel = p - from;
    SegmentFrame {
        course,
        along_track: rel.x * c + rel.y * s,
        cross_track: -rel.x * s + rel.y * c,
        length: d.norm(),
    }
}

/// Heading toward the point `lookahead` metres ahead of the projection of
/// `p` onto the segment.
pub fn los_heading_on_segment(p: &Point, from: &Point, to: &Point, lookahead: f64) -> f64 {
    let f = segment_frame(p, from, to);
    angle::wrap(f.course - (f.cross_track / lookahead).atan())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosOutput {
    pub psi_los: f64,
    pub cross_track: f64,
    pub segment: usize,
    pub complete: bool,
}

/// Waypoint path with an active segment.
#[derive(Debug, Clone, PartialEq)]
pub struct LosGuidance {
    pub waypoints: Vec<Point>,
    pub lookahead: f64,
    pub acceptance_radius: f64,
    active: usize,
    complete: bool,
}

impl LosGuidance {
    /// Returns `None` unless the path has at least two waypoints and positive radii.
    pub fn new(waypoints: Vec<Point>, lookahead: f64, acceptance_radius: f64) -> Option<Self> {
        if waypoints.len() < 2 || !(lookahead > 0.0) || !(acceptance_radius >= 0.0) {
            return None;
        }
        Some(Self { waypoints, lookahead, acceptance_radius, active: 0, complete: false })
    }

    pub fn active_segment(&self) -> usize {
        self.active
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// Advances the active segment if needed and returns the LOS heading.
    ///
    /// A waypoint is reached when the vessel is inside the acceptance radius
    /// or has passed it along-track. Past the final waypoint the heading
    /// points back at it and the path is flagged complete.
    pub fn update(&mut self, p: &Point) -> LosOutput {
        let last = self.waypoints.len() - 2;
        loop {
            let (a, b) = (self.waypoints[self.active], self.waypoints[self.active + 1]);
            let f = segment_frame(p, &a, &b);
            let reached = (p - b).norm() <= self.acceptance_radius || f.along_track >= f.length;
            if !reached {
                break;
            }
            if self.active < last {
                self.active += 1;
            } else {
                self.complete = true;
                break;
            }
        }
        let (a, b) = (self.waypoints[self.active], self.waypoints[self.active + 1]);
        let frame = segment_frame(p, &a, &b);
        let psi_los = if self.complete {
            let to = b - p;
            if to.norm() > 0.0 {
                to.y.atan2(to.x)
            } else {
                frame.course
            }
        } else {
            angle::wrap(frame.course - (frame.cross_track / self.lookahead).atan())
        };
        LosOutput { psi_los, cross_track: frame.cross_track, segment: self.active, complete: self.complete }
    }
}

/// Cross-track error against segment `segment` of `waypoints`, using the
/// same projection as [`LosGuidance`].
pub fn cross_track_error(p: &Point, waypoints: &[Point], segment: usize) -> f64 {
    segment_frame(p, &waypoints[segment], &waypoints[segment + 1]).cross_track
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn on_segment_gives_course() {
        let (a, b) = (Point::new(0.0, 0.0), Point::new(100.0, 100.0));
        let psi = los_heading_on_segment(&Point::new(30.0, 30.0), &a, &b, 50.0);
        assert!((psi - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn cross_track_geometry() {
        // Due north segment; vessel 20 m east of it.
        let (a, b) = (Point::new(0.0, 0.0), Point::new(1000.0, 0.0));
        let p = Point::new(300.0, 20.0);
        let f = segment_frame(&p, &a, &b);
        assert!((f.cross_track - 20.0).abs() < 1e-12);
        let psi = los_heading_on_segment(&p, &a, &b, 150.0);
        assert!((psi - (0.0 - (20.0f64 / 150.0).atan())).abs() < 1e-15);
        // Lookahead-point oracle: aim at projection + lookahead along the path.
        let target = Point::new(300.0 + 150.0, 0.0);
        let aim = (target - p).y.atan2((target - p).x);
        assert!((psi - aim).abs() < 1e-12);
    }

    #[test]
    fn switches_inside_acceptance_radius() {
        let wps = vec![Point::new(0.0, 0.0), Point::new(500.0, 0.0), Point::new(500.0, 500.0)];
        let mut los = LosGuidance::new(wps, 100.0, 50.0).unwrap();
        assert_eq!(los.update(&Point::new(100.0, 0.0)).segment, 0);
        let out = los.update(&Point::new(460.0, 5.0));
        assert_eq!(out.segment, 1);
        assert!(!out.complete);
    }

    #[test]
    fn past_final_waypoint_completes() {
        let wps = vec![Point::new(0.0, 0.0), Point::new(500.0, 0.0)];
        let mut los = LosGuidance::new(wps, 100.0, 50.0).unwrap();
        let out = los.update(&Point::new(600.0, 10.0));
        assert!(out.complete);
        let to = Point::new(500.0, 0.0) - Point::new(600.0, 10.0);
        assert!((out.psi_los - to.y.atan2(to.x)).abs() < 1e-15);
    }

    #[test]
    fn rejects_short_path() {
        assert!(LosGuidance::new(vec![Point::zeros()], 100.0, 10.0).is_none());
    }
}
