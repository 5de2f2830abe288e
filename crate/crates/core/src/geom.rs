//! Small 2D geometry helpers shared by the scene model and the planner.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        self.sub(o).norm()
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        Vec2::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

/// Distance from point `p` to segment `ab`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

/// True if segments `ab` and `cd` intersect (including touching).
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = d.sub(c).cross(a.sub(c));
    let d2 = d.sub(c).cross(b.sub(c));
    let d3 = b.sub(a).cross(c.sub(a));
    let d4 = b.sub(a).cross(d.sub(a));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Vec2, a: Vec2, b: Vec2| -> bool {
        b.sub(a).cross(p.sub(a)).abs() < 1e-12
            && p.x >= a.x.min(b.x) - 1e-12
            && p.x <= a.x.max(b.x) + 1e-12
            && p.y >= a.y.min(b.y) - 1e-12
            && p.y <= a.y.max(b.y) + 1e-12
    };
    on(c, a, b) || on(d, a, b) || on(a, c, d) || on(b, c, d)
}

/// Minimum distance between segments `ab` and `cd` (0 when they cross).
pub fn segment_segment_distance(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// A simple closed polygon in world coordinates. Vertices are stored once;
/// the closing edge from last back to first is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Self {
        Self { vertices }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i].into(), self.vertices[(i + 1) % n].into()))
    }

    /// Even-odd point containment test.
    pub fn contains(&self, p: Vec2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the polygon: 0 inside, else distance to the boundary.
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from segment `ab` to the polygon: 0 if the segment enters it.
    pub fn distance_to_segment(&self, a: Vec2, b: Vec2) -> f64 {
        if self.contains(a) || self.contains(b) {
            return 0.0;
        }
        self.edges()
            .map(|(c, d)| segment_segment_distance(a, b, c, d))
            .fold(f64::INFINITY, f64::min)
    }

    /// True if the polygon has no two non-adjacent edges that intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            let (a, b) = (
                Vec2::from(self.vertices[i]),
                Vec2::from(self.vertices[(i + 1) % n]),
            );
            for j in (i + 1)..n {
                // skip adjacent edges (shared vertex always "touches")
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let (c, d) = (
                    Vec2::from(self.vertices[j]),
                    Vec2::from(self.vertices[(j + 1) % n]),
                );
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            lo[0] = lo[0].min(v[0]);
            lo[1] = lo[1].min(v[1]);
            hi[0] = hi[0].max(v[0]);
            hi[1] = hi[1].max(v[1]);
        }
        (lo, hi)
    }
}

/// Three-point Menger curvature: 1/R of the circumscribed circle, 0 for
/// collinear points.
pub fn menger_curvature(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let area2 = b.sub(a).cross(c.sub(a)).abs();
    let d = a.dist(b) * b.dist(c) * c.dist(a);
    if d < 1e-12 {
        0.0
    } else {
        2.0 * area2 / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn point_in_rect() {
        let p = Polygon::rect(0.0, 0.0, 2.0, 2.0);
        assert!(p.contains(Vec2::new(1.0, 1.0)));
        assert!(!p.contains(Vec2::new(3.0, 1.0)));
    }

    #[test]
    fn rect_distance() {
        let p = Polygon::rect(0.0, 0.0, 2.0, 2.0);
        assert_relative_eq!(p.distance_to_point(Vec2::new(3.0, 1.0)), 1.0);
        assert_relative_eq!(p.distance_to_point(Vec2::new(1.0, 1.0)), 0.0);
    }

    #[test]
    fn segment_through_polygon_has_zero_distance() {
        let p = Polygon::rect(0.0, 0.0, 1.0, 1.0);
        assert_relative_eq!(
            p.distance_to_segment(Vec2::new(-1.0, 0.5), Vec2::new(2.0, 0.5)),
            0.0
        );
    }

    #[test]
    fn self_intersecting_polygon_detected() {
        let bow = Polygon::new(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(!bow.is_simple());
        let square = Polygon::rect(0.0, 0.0, 1.0, 1.0);
        assert!(square.is_simple());
    }

    #[test]
    fn menger_circle_exact() {
        // points on a radius-2 circle
        let r = 2.0;
        let a = Vec2::new(r, 0.0);
        let b = Vec2::new(0.0, r);
        let c = Vec2::new(-r, 0.0);
        assert_relative_eq!(menger_curvature(a, b, c), 1.0 / r, epsilon = 1e-12);
        // collinear
        assert_eq!(
            menger_curvature(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)),
            0.0
        );
    }
}
