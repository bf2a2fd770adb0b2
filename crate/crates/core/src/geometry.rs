//! Planar points and polygon loop measures.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Rotation by -90 degrees. For a counter-clockwise loop this maps an edge
    /// tangent to the outward normal.
    pub fn rotate_cw(self) -> Point2 {
        Point2::new(self.y, -self.x)
    }

    /// Rotation by +90 degrees.
    pub fn rotate_ccw(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 1.0,
    };

    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let r = Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        if !(x_min.is_finite() && x_max.is_finite() && y_min.is_finite() && y_max.is_finite())
            || x_max <= x_min
            || y_max <= y_min
        {
            return Err(VemError::DegenerateGeometry(format!(
                "rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}] is empty"
            )));
        }
        Ok(r)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        p.x >= self.x_min - tol
            && p.x <= self.x_max + tol
            && p.y >= self.y_min - tol
            && p.y <= self.y_max + tol
    }

    pub fn contains_strictly(&self, p: Point2) -> bool {
        p.x > self.x_min && p.x < self.x_max && p.y > self.y_min && p.y < self.y_max
    }
}

/// Twice the signed area of a closed loop (positive when counter-clockwise).
pub fn twice_signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| pts[i].cross(pts[(i + 1) % n]))
        .sum::<f64>()
}

/// Measure, centroid and diameter of a closed loop.
///
/// Coincident edges traversed in opposite directions (a slit) cancel in both
/// the area and the first moments, so slit cells get the measure of the region
/// they enclose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopGeometry {
    pub measure: f64,
    pub centroid: Point2,
    pub diameter: f64,
    /// +1 for counter-clockwise input, -1 for clockwise.
    pub orientation: f64,
}

pub fn loop_geometry(pts: &[Point2]) -> Result<LoopGeometry> {
    if pts.len() < 3 {
        return Err(VemError::DegenerateGeometry(format!(
            "loop with {} vertices",
            pts.len()
        )));
    }
    // Shift to the first vertex to limit cancellation in the moments.
    let origin = pts[0];
    let n = pts.len();
    let mut a2 = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    for i in 0..n {
        let p = pts[i] - origin;
        let q = pts[(i + 1) % n] - origin;
        let w = p.cross(q);
        a2 += w;
        mx += (p.x + q.x) * w;
        my += (p.y + q.y) * w;
    }
    let diameter = diameter(pts);
    if !(a2.abs() > f64::EPSILON * diameter * diameter) {
        return Err(VemError::DegenerateGeometry(format!(
            "loop has zero area (diameter {diameter:e})"
        )));
    }
    let centroid = Point2::new(origin.x + mx / (3.0 * a2), origin.y + my / (3.0 * a2));
    Ok(LoopGeometry {
        measure: 0.5 * a2.abs(),
        centroid,
        diameter,
        orientation: a2.signum(),
    })
}

/// Largest pairwise vertex distance.
pub fn diameter(pts: &[Point2]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            d = d.max(p.distance(*q));
        }
    }
    d
}

pub fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Winding number of a closed loop around `p`.
///
/// Slit edges are crossed once in each direction and contribute nothing.
pub fn winding_number(pts: &[Point2], p: Point2) -> i32 {
    let n = pts.len();
    let mut wn = 0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let side = (b - a).cross(p - a);
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// True if `p` lies within `tol` of any edge of the loop.
pub fn on_loop_boundary(pts: &[Point2], p: Point2, tol: f64) -> bool {
    let n = pts.len();
    (0..n).any(|i| segment_distance(p, pts[i], pts[(i + 1) % n]) <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn unit_square() {
        let g = loop_geometry(&square()).unwrap();
        assert!((g.measure - 1.0).abs() < 1e-15);
        assert!((g.centroid.x - 0.5).abs() < 1e-15 && (g.centroid.y - 0.5).abs() < 1e-15);
        assert!((g.diameter - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(g.orientation, 1.0);
    }

    #[test]
    fn square_with_slit_keeps_area() {
        // Down the slit from the top edge midpoint and back up.
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.5, 1.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.5, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let g = loop_geometry(&pts).unwrap();
        assert!((g.measure - 1.0).abs() < 1e-15);
        assert!((g.diameter - 2f64.sqrt()).abs() < 1e-15);
        assert!((g.centroid.x - 0.5).abs() < 1e-15);
    }

    #[test]
    fn triangle() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let g = loop_geometry(&pts).unwrap();
        assert!((g.measure - 0.5).abs() < 1e-15);
        assert!((g.centroid.x - 1.0 / 3.0).abs() < 1e-15);
        assert!((g.centroid.y - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn clockwise_loop_reports_orientation() {
        let mut pts = square();
        pts.reverse();
        let g = loop_geometry(&pts).unwrap();
        assert_eq!(g.orientation, -1.0);
        assert!((g.measure - 1.0).abs() < 1e-15);
    }

    #[test]
    fn collinear_loop_is_degenerate() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
        ];
        assert!(matches!(
            loop_geometry(&pts),
            Err(VemError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn winding_ignores_slit() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.5, 1.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.5, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert_eq!(winding_number(&pts, Point2::new(0.25, 0.75)), 1);
        assert_eq!(winding_number(&pts, Point2::new(0.75, 0.75)), 1);
        assert_eq!(winding_number(&pts, Point2::new(1.5, 0.75)), 0);
    }
}
