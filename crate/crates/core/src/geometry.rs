//! Affine triangle geometry shared by the element and mesh code.

use nalgebra::{Matrix2, Point2, Vector2};

pub type Point = Point2<f64>;
pub type Vec2 = Vector2<f64>;

/// Affine map from the reference triangle (0,0), (1,0), (0,1) onto a
/// physical triangle: `x = v0 + J xi`.
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub vertices: [Point; 3],
    pub jacobian: Matrix2<f64>,
    pub inverse_jacobian: Matrix2<f64>,
    pub det: f64,
}

impl TriangleGeometry {
    pub fn new(vertices: [Point; 3]) -> Self {
        let e1 = vertices[1] - vertices[0];
        let e2 = vertices[2] - vertices[0];
        let jacobian = Matrix2::new(e1.x, e2.x, e1.y, e2.y);
        let det = jacobian.determinant();
        let inverse_jacobian = jacobian.try_inverse().unwrap_or_else(Matrix2::zeros);
        Self {
            vertices,
            jacobian,
            inverse_jacobian,
            det,
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }

    pub fn map(&self, xi: &Point) -> Point {
        self.vertices[0] + self.jacobian * xi.coords
    }

    pub fn inverse_map(&self, x: &Point) -> Point {
        Point::from(self.inverse_jacobian * (x - self.vertices[0]))
    }

    /// Longest edge length.
    pub fn diameter(&self) -> f64 {
        (0..3)
            .map(|i| (self.vertices[(i + 1) % 3] - self.vertices[i]).norm())
            .fold(0.0, f64::max)
    }

    pub fn inradius(&self) -> f64 {
        let perimeter: f64 = (0..3)
            .map(|i| (self.vertices[(i + 1) % 3] - self.vertices[i]).norm())
            .sum();
        2.0 * self.area() / perimeter
    }

    pub fn centroid(&self) -> Point {
        Point::from((self.vertices[0].coords + self.vertices[1].coords + self.vertices[2].coords) / 3.0)
    }

    /// Euclidean distance from `p` to the closed triangle (0 inside).
    pub fn distance_to(&self, p: &Point) -> f64 {
        let xi = self.inverse_map(p);
        let tol = -1e-14;
        if xi.x >= tol && xi.y >= tol && xi.x + xi.y <= 1.0 - tol {
            return 0.0;
        }
        (0..3)
            .map(|i| segment_distance(p, &self.vertices[i], &self.vertices[(i + 1) % 3]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether `p` lies in the closed triangle, with a relative tolerance.
    pub fn contains(&self, p: &Point) -> bool {
        let xi = self.inverse_map(p);
        let tol = 1e-12;
        xi.x >= -tol && xi.y >= -tol && xi.x + xi.y <= 1.0 + tol
    }
}

pub fn segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Local edge `i` is opposite local vertex `i`; its endpoints are the other
/// two local vertices in increasing order.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[1, 2], [0, 2], [0, 1]];

impl TriangleGeometry {
    /// Outward unit normal and length of local edge `i`.
    pub fn edge_normal(&self, i: usize) -> (Vec2, f64) {
        let [a, b] = LOCAL_EDGES[i];
        let t = self.vertices[b] - self.vertices[a];
        let len = t.norm();
        let mut n = Vec2::new(t.y, -t.x) / len;
        if n.dot(&(self.vertices[i] - self.vertices[a])) > 0.0 {
            n = -n;
        }
        (n, len)
    }
}
