//! Gauss rules on the unit interval and the reference triangle, plus dyadic
//! refinement toward singular points.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::Point;

pub const MAX_ORDER: usize = 20;

/// Gauss-Legendre rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Quadrature on the reference triangle `(0,0), (1,0), (0,1)`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Barycentric coordinates `(l0, l1, l2)`; the reference point is `(l1, l2)`.
    pub points: Vec<[f64; 3]>,
    /// Weights summing to the reference area 1/2.
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn reference_point(&self, i: usize) -> Point {
        Point::new(self.points[i][1], self.points[i][2])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        (0..self.len()).map(|i| (self.reference_point(i), self.weights[i]))
    }

    fn from_reference(pts: Vec<(Point, f64)>, order: usize) -> Self {
        let (points, weights) = pts
            .into_iter()
            .map(|(p, w)| ([1.0 - p.x - p.y, p.x, p.y], w))
            .unzip();
        Self { points, weights, order }
    }
}

/// `n`-point Gauss-Legendre rule on `[0, 1]`, exact to degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> LineRule {
    assert!(n >= 1);
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        points[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    LineRule { points, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Line rule exact for polynomials of degree `order`.
pub fn line_rule(order: usize) -> &'static LineRule {
    static RULES: OnceLock<Vec<LineRule>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (1..=40).map(gauss_legendre).collect());
    let n = (order / 2 + 1).clamp(1, 40);
    &rules[n - 1]
}

/// Triangle rule exact for total degree `order`, `1 <= order <= 20`.
pub fn quadrature(order: usize) -> Result<&'static QuadratureRule> {
    static RULES: OnceLock<Vec<QuadratureRule>> = OnceLock::new();
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let rules = RULES.get_or_init(|| (1..=MAX_ORDER).map(build_rule).collect());
    Ok(&rules[order - 1])
}

/// Like [`quadrature`] but clamps the order into the supported range.
pub fn quadrature_clamped(order: usize) -> &'static QuadratureRule {
    quadrature(order.clamp(1, MAX_ORDER)).expect("clamped order")
}

fn build_rule(order: usize) -> QuadratureRule {
    match order {
        1 => QuadratureRule::from_reference(vec![(Point::new(1.0 / 3.0, 1.0 / 3.0), 0.5)], 1),
        2 => QuadratureRule::from_reference(
            vec![
                (Point::new(1.0 / 6.0, 1.0 / 6.0), 1.0 / 6.0),
                (Point::new(2.0 / 3.0, 1.0 / 6.0), 1.0 / 6.0),
                (Point::new(1.0 / 6.0, 2.0 / 3.0), 1.0 / 6.0),
            ],
            2,
        ),
        _ => {
            // Collapsed (Duffy) tensor Gauss rule.
            let n = (order + 2).div_ceil(2);
            let g = gauss_legendre(n);
            let mut pts = Vec::with_capacity(n * n);
            for (&u, &wu) in g.points.iter().zip(&g.weights) {
                for (&v, &wv) in g.points.iter().zip(&g.weights) {
                    pts.push((Point::new(u * (1.0 - v), v), wu * wv * (1.0 - v)));
                }
            }
            QuadratureRule::from_reference(pts, order)
        }
    }
}

/// Triangle rule whose sub-triangles containing any of `singular` (given in
/// reference coordinates) are split dyadically `depth` times.
pub fn refined_toward(order: usize, singular: &[Point], depth: usize) -> QuadratureRule {
    let base = quadrature_clamped(order);
    if singular.is_empty() || depth == 0 {
        return base.clone();
    }
    let mut pts = Vec::new();
    let root = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
    subdivide(root, base, singular, depth, &mut pts);
    QuadratureRule::from_reference(pts, order)
}

fn contains(tri: &[Point; 3], p: &Point) -> bool {
    let cross = |a: &Point, b: &Point, c: &Point| (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    let area = cross(&tri[0], &tri[1], &tri[2]);
    let tol = 1e-12 * area.abs();
    let d0 = cross(&tri[0], &tri[1], p);
    let d1 = cross(&tri[1], &tri[2], p);
    let d2 = cross(&tri[2], &tri[0], p);
    d0 >= -tol && d1 >= -tol && d2 >= -tol
}

fn subdivide(tri: [Point; 3], base: &QuadratureRule, singular: &[Point], depth: usize, out: &mut Vec<(Point, f64)>) {
    if depth == 0 || !singular.iter().any(|p| contains(&tri, p)) {
        let e1 = tri[1] - tri[0];
        let e2 = tri[2] - tri[0];
        let det = (e1.x * e2.y - e1.y * e2.x).abs();
        for (xi, w) in base.iter() {
            out.push((tri[0] + e1 * xi.x + e2 * xi.y, w * det));
        }
        return;
    }
    let mid = |a: &Point, b: &Point| Point::from((a.coords + b.coords) * 0.5);
    let m01 = mid(&tri[0], &tri[1]);
    let m12 = mid(&tri[1], &tri[2]);
    let m02 = mid(&tri[0], &tri[2]);
    for child in [
        [tri[0], m01, m02],
        [m01, tri[1], m12],
        [m02, m12, tri[2]],
        [m12, m02, m01],
    ] {
        subdivide(child, base, singular, depth - 1, out);
    }
}

/// Line rule on `[0, 1]` graded dyadically toward parameter values in
/// `singular`.
pub fn line_refined_toward(order: usize, singular: &[f64], depth: usize) -> LineRule {
    let base = line_rule(order);
    if singular.is_empty() || depth == 0 {
        return base.clone();
    }
    let mut rule = LineRule { points: Vec::new(), weights: Vec::new() };
    line_subdivide(0.0, 1.0, base, singular, depth, &mut rule);
    rule
}

fn line_subdivide(a: f64, b: f64, base: &LineRule, singular: &[f64], depth: usize, out: &mut LineRule) {
    let tol = 1e-12;
    if depth == 0 || !singular.iter().any(|&s| s >= a - tol && s <= b + tol) {
        for (&t, &w) in base.points.iter().zip(&base.weights) {
            out.points.push(a + (b - a) * t);
            out.weights.push((b - a) * w);
        }
        return;
    }
    let m = 0.5 * (a + b);
    line_subdivide(a, m, base, singular, depth - 1, out);
    line_subdivide(m, b, base, singular, depth - 1, out);
}
