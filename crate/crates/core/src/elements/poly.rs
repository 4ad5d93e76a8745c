//! Graded monomials `1; x, y; x^2, xy, y^2; ...` in reference coordinates.

use crate::geometry::{Point, Vec2};

pub const fn monomial_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Exponents `(a, b)` of `x^a y^b`, in graded order.
pub fn exponents(degree: usize) -> Vec<(i32, i32)> {
    let mut out = Vec::with_capacity(monomial_count(degree));
    for d in 0..=degree as i32 {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

fn ipow(x: f64, n: i32) -> f64 {
    if n <= 0 {
        1.0
    } else {
        x.powi(n)
    }
}

pub fn values(degree: usize, p: &Point) -> Vec<f64> {
    exponents(degree).into_iter().map(|(a, b)| ipow(p.x, a) * ipow(p.y, b)).collect()
}

pub fn gradients(degree: usize, p: &Point) -> Vec<Vec2> {
    exponents(degree)
        .into_iter()
        .map(|(a, b)| {
            let dx = if a > 0 { a as f64 * ipow(p.x, a - 1) * ipow(p.y, b) } else { 0.0 };
            let dy = if b > 0 { b as f64 * ipow(p.x, a) * ipow(p.y, b - 1) } else { 0.0 };
            Vec2::new(dx, dy)
        })
        .collect()
}

/// Shifted Legendre polynomial of degree `m` on `[0, 1]`.
pub fn legendre01(m: usize, t: f64) -> f64 {
    let x = 2.0 * t - 1.0;
    let (mut p0, mut p1) = (1.0, x);
    match m {
        0 => 1.0,
        1 => x,
        _ => {
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_order() {
        assert_eq!(exponents(2), vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        assert_eq!(monomial_count(3), 10);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = Point::new(0.3, 0.2);
        let eps = 1e-6;
        let g = gradients(4, &p);
        let vx1 = values(4, &Point::new(p.x + eps, p.y));
        let vx0 = values(4, &Point::new(p.x - eps, p.y));
        let vy1 = values(4, &Point::new(p.x, p.y + eps));
        let vy0 = values(4, &Point::new(p.x, p.y - eps));
        for i in 0..g.len() {
            assert!((g[i].x - (vx1[i] - vx0[i]) / (2.0 * eps)).abs() < 1e-8);
            assert!((g[i].y - (vy1[i] - vy0[i]) / (2.0 * eps)).abs() < 1e-8);
        }
    }

    #[test]
    fn legendre_values() {
        assert_eq!(legendre01(0, 0.3), 1.0);
        assert!((legendre01(1, 0.25) + 0.5).abs() < 1e-15);
        assert!((legendre01(2, 0.5) + 0.5).abs() < 1e-15);
        assert!((legendre01(2, 1.0) - 1.0).abs() < 1e-15);
    }
}
