//! Planar geometry primitives shared by the road network and the planners.

use serde::{Deserialize, Serialize};

/// A point in the mission plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Straight-line distance between two points, meters.
pub fn euclidean(p: Point, q: Point) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

/// Linear interpolation from `p` to `q` at parameter `t` in [0, 1].
pub fn lerp(p: Point, q: Point, t: f64) -> Point {
    Point::new(p.x + (q.x - p.x) * t, p.y + (q.y - p.y) * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        assert_eq!(euclidean(Point::new(0.0, 0.0), Point::new(3.0, 4.0)), 5.0);
    }

    #[test]
    fn zero_for_identical_points() {
        let p = Point::new(-7.25, 11.0);
        assert_eq!(euclidean(p, p), 0.0);
    }

    #[test]
    fn translation_invariant() {
        assert_eq!(euclidean(Point::new(1.0, 1.0), Point::new(4.0, 5.0)), 5.0);
    }

    #[test]
    fn lerp_endpoints() {
        let p = Point::new(0.0, 2.0);
        let q = Point::new(10.0, -2.0);
        assert_eq!(lerp(p, q, 0.0), p);
        assert_eq!(lerp(p, q, 1.0), q);
        assert_eq!(lerp(p, q, 0.5), Point::new(5.0, 0.0));
    }
}
