//! Planar polygon helpers and depth-attributed charts.

use nalgebra::Vector2;

pub type Point = Vector2<f64>;

/// Simple polygon given by its vertices; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    /// Axis-aligned rectangle from two opposite corners.
    pub fn rectangle(min: Point, max: Point) -> Self {
        Self::new(vec![min, Point::new(max.x, min.y), max, Point::new(min.x, max.y)])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd ray casting. Points on the boundary may land on either side.
    pub fn contains(&self, p: &Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Nearest point on the boundary and its distance.
    pub fn nearest_boundary_point(&self, p: &Point) -> (Point, f64) {
        let mut best = (self.vertices[0], f64::INFINITY);
        for (a, b) in self.edges() {
            let q = closest_point_on_segment(p, &a, &b);
            let d = (p - q).norm();
            if d < best.1 {
                best = (q, d);
            }
        }
        best
    }
}

pub fn closest_point_on_segment(p: &Point, a: &Point, b: &Point) -> Point {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// A region of constant depth.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartRegion {
    /// Charted depth [m].
    pub depth: f64,
    pub polygon: Polygon,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chart {
    pub regions: Vec<ChartRegion>,
}

/// Closest point of water too shallow for the given draft.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundingHit {
    pub point: Point,
    pub distance: f64,
    pub region: usize,
    /// The query position lies inside the shallow region.
    pub grounded: bool,
}

impl Chart {
    pub fn new(regions: Vec<ChartRegion>) -> Self {
        Self { regions }
    }

    fn shallow(&self, draft: f64) -> impl Iterator<Item = (usize, &ChartRegion)> {
        self.regions.iter().enumerate().filter(move |(_, r)| r.depth < draft)
    }

    /// Index of the first shallow region containing `p`.
    pub fn grounded_in(&self, p: &Point, draft: f64) -> Option<usize> {
        self.shallow(draft).find(|(_, r)| r.polygon.contains(p)).map(|(i, _)| i)
    }

    /// Nearest boundary point of any region shallower than `draft`.
    ///
    /// Inside a shallow region the query point itself is returned with zero
    /// distance and `grounded` set. Ties keep the lowest region index.
    pub fn closest_grounding_point(&self, p: &Point, draft: f64) -> Option<GroundingHit> {
        if let Some(region) = self.grounded_in(p, draft) {
            return Some(GroundingHit { point: *p, distance: 0.0, region, grounded: true });
        }
        let mut best: Option<GroundingHit> = None;
        for (i, region) in self.shallow(draft) {
            let (q, d) = region.polygon.nearest_boundary_point(p);
            if best.is_none_or(|b| d < b.distance) {
                best = Some(GroundingHit { point: q, distance: d, region: i, grounded: false });
            }
        }
        best
    }
}
