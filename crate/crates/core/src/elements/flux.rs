//! `RT_k` and `BDM_k` reference elements built from their moment functionals,
//! mapped to physical triangles with the contravariant Piola transform.
//!
//! Local DOF `i * (k + 1) + m` is the moment of `tau . n_out` against the
//! shifted Legendre polynomial `q_m(t)` on local edge `i`, with `t` running
//! from the lower to the higher local vertex of that edge. Interior DOFs
//! follow: moments of `tau` against `J^{-T} q` for `q` in `P_{k-1}^2` (RT)
//! or `{(1,0), (0,1), (-y,x)}` (BDM2), in reference coordinates.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use super::poly;
use super::quadrature::{quadrature_clamped, refined_toward};
use super::{Family, SpaceDescriptor};
use crate::error::{Error, Result};
use crate::geometry::{Point, TriangleGeometry, Vec2, LOCAL_EDGES};

/// Reference basis of a flux element; function `j` is
/// `(sum_l cx[j][l] m_l, sum_l cy[j][l] m_l)` over graded monomials `m_l`.
#[derive(Debug)]
pub struct FluxElement {
    pub desc: SpaceDescriptor,
    cx: Vec<Vec<f64>>,
    cy: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MomentOptions {
    /// Orders added to the polynomial quadrature order.
    pub excess: usize,
    /// Physical points where the field may be singular.
    pub singular: Vec<Point>,
    /// Dyadic subdivision depth toward singular points.
    pub depth: usize,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self { excess: 4, singular: Vec::new(), depth: 4 }
    }
}

pub fn flux_element(desc: SpaceDescriptor) -> Result<&'static FluxElement> {
    static RT0: OnceLock<FluxElement> = OnceLock::new();
    static RT1: OnceLock<FluxElement> = OnceLock::new();
    static BDM1: OnceLock<FluxElement> = OnceLock::new();
    static BDM2: OnceLock<FluxElement> = OnceLock::new();
    if desc.family == Family::DiscontinuousScalar {
        return Err(Error::UnsupportedDegree { space: desc.to_string(), degree: desc.degree });
    }
    desc.validate()?;
    let cell = match (desc.family, desc.degree) {
        (Family::Rt, 0) => &RT0,
        (Family::Rt, 1) => &RT1,
        (Family::Bdm, 1) => &BDM1,
        _ => &BDM2,
    };
    Ok(cell.get_or_init(|| FluxElement::build(desc)))
}

fn reference_geometry() -> TriangleGeometry {
    TriangleGeometry::new([Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)])
}

/// Interior test functions in reference coordinates.
fn interior_tests(desc: SpaceDescriptor, xi: &Point) -> Vec<Vec2> {
    match desc.family {
        Family::Rt if desc.degree >= 1 => {
            let m = poly::values(desc.degree - 1, xi);
            m.iter().map(|&v| Vec2::new(v, 0.0)).chain(m.iter().map(|&v| Vec2::new(0.0, v))).collect()
        }
        Family::Bdm if desc.degree == 2 => vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(-xi.y, xi.x)],
        _ => Vec::new(),
    }
}

impl FluxElement {
    fn build(desc: SpaceDescriptor) -> Self {
        let p = desc.poly_degree();
        let nm = poly::monomial_count(p);
        // Prime basis as (x-coeffs, y-coeffs) over monomials of degree <= p.
        let mut prime: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let base_deg = desc.degree;
        for l in 0..poly::monomial_count(base_deg) {
            let mut c = vec![0.0; nm];
            c[l] = 1.0;
            prime.push((c.clone(), vec![0.0; nm]));
            prime.push((vec![0.0; nm], c));
        }
        if desc.family == Family::Rt {
            // x * (homogeneous monomials of degree k).
            let exps = poly::exponents(p);
            let lookup = |a: i32, b: i32| exps.iter().position(|&e| e == (a, b)).unwrap();
            let k = desc.degree as i32;
            for b in 0..=k {
                let a = k - b;
                let mut cx = vec![0.0; nm];
                let mut cy = vec![0.0; nm];
                cx[lookup(a + 1, b)] = 1.0;
                cy[lookup(a, b + 1)] = 1.0;
                prime.push((cx, cy));
            }
        }
        let n = prime.len();
        assert_eq!(n, desc.local_dim());

        let raw = FluxElement {
            desc,
            cx: prime.iter().map(|(x, _)| x.clone()).collect(),
            cy: prime.iter().map(|(_, y)| y.clone()).collect(),
        };
        let geom = reference_geometry();
        let opts = MomentOptions { excess: 2, ..MomentOptions::default() };
        let mut dual = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let col = dof_functionals_with(desc, &geom, &|x: &Point| raw.eval_one(j, x), &opts);
            for i in 0..n {
                dual[(i, j)] = col[i];
            }
        }
        let inv = dual.try_inverse().expect("unisolvent element");
        let mut cx = vec![vec![0.0; nm]; n];
        let mut cy = vec![vec![0.0; nm]; n];
        for j in 0..n {
            for l in 0..n {
                let c = inv[(l, j)];
                if c != 0.0 {
                    for m in 0..nm {
                        cx[j][m] += c * raw.cx[l][m];
                        cy[j][m] += c * raw.cy[l][m];
                    }
                }
            }
        }
        FluxElement { desc, cx, cy }
    }

    pub fn n_dofs(&self) -> usize {
        self.cx.len()
    }

    fn eval_one(&self, j: usize, xi: &Point) -> Vec2 {
        let m = poly::values(self.desc.poly_degree(), xi);
        Vec2::new(dot(&self.cx[j], &m), dot(&self.cy[j], &m))
    }

    /// Reference values and reference divergences of all basis functions.
    pub fn eval_reference(&self, xi: &Point) -> (Vec<Vec2>, Vec<f64>) {
        let p = self.desc.poly_degree();
        let m = poly::values(p, xi);
        let g = poly::gradients(p, xi);
        let values = (0..self.n_dofs()).map(|j| Vec2::new(dot(&self.cx[j], &m), dot(&self.cy[j], &m))).collect();
        let divs = (0..self.n_dofs())
            .map(|j| {
                self.cx[j].iter().zip(&g).map(|(c, g)| c * g.x).sum::<f64>()
                    + self.cy[j].iter().zip(&g).map(|(c, g)| c * g.y).sum::<f64>()
            })
            .collect();
        (values, divs)
    }

    /// Physical values and divergences (local orientation) at reference point `xi`.
    pub fn eval(&self, geom: &TriangleGeometry, xi: &Point) -> (Vec<Vec2>, Vec<f64>) {
        let (v, d) = self.eval_reference(xi);
        let inv_det = 1.0 / geom.det;
        (
            v.into_iter().map(|v| geom.jacobian * v * inv_det).collect(),
            d.into_iter().map(|d| d * inv_det).collect(),
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Piola-mapped basis in the triangle's local orientation (outward normals).
pub fn flux_basis(desc: SpaceDescriptor, geom: &TriangleGeometry, xi: &Point) -> Result<(Vec<Vec2>, Vec<f64>)> {
    Ok(flux_element(desc)?.eval(geom, xi))
}

/// Local DOF functionals of a vector field given in physical coordinates.
pub fn dof_functionals(
    desc: SpaceDescriptor,
    geom: &TriangleGeometry,
    field: &dyn Fn(&Point) -> Vec2,
    opts: &MomentOptions,
) -> Result<Vec<f64>> {
    if !desc.is_flux() {
        return Err(Error::UnsupportedDegree { space: desc.to_string(), degree: desc.degree });
    }
    desc.validate()?;
    Ok(dof_functionals_with(desc, geom, field, opts))
}

fn dof_functionals_with(
    desc: SpaceDescriptor,
    geom: &TriangleGeometry,
    field: &dyn Fn(&Point) -> Vec2,
    opts: &MomentOptions,
) -> Vec<f64> {
    let k = desc.edge_dofs() - 1;
    let p = desc.poly_degree();
    let mut out = Vec::with_capacity(desc.local_dim());

    let edge_order = p + k + opts.excess;
    for (i, [a, b]) in LOCAL_EDGES.iter().enumerate() {
        let (n, len) = geom.edge_normal(i);
        let (pa, pb) = (geom.vertices[*a], geom.vertices[*b]);
        let rule = crate::spaces::edge_rule(&pa, &pb, edge_order, &opts.singular, opts.depth);
        let mut moments = vec![0.0; k + 1];
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            let x = pa + (pb - pa) * t;
            let tn = field(&x).dot(&n);
            for (m, mom) in moments.iter_mut().enumerate() {
                *mom += w * len * tn * poly::legendre01(m, t);
            }
        }
        out.extend(moments);
    }

    let n_int = desc.interior_dofs();
    if n_int > 0 {
        let order = p + opts.excess + 1;
        let singular: Vec<Point> = opts
            .singular
            .iter()
            .filter(|s| geom.contains(s))
            .map(|s| geom.inverse_map(s))
            .collect();
        let rule = if singular.is_empty() {
            quadrature_clamped(order).clone()
        } else {
            refined_toward(order, &singular, opts.depth)
        };
        let jit = geom.inverse_jacobian.transpose();
        let mut moments = vec![0.0; n_int];
        for (xi, w) in rule.iter() {
            let v = field(&geom.map(&xi));
            for (mom, q) in moments.iter_mut().zip(interior_tests(desc, &xi)) {
                *mom += w * geom.det * v.dot(&(jit * q));
            }
        }
        out.extend(moments);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALL: [SpaceDescriptor; 4] =
        [SpaceDescriptor { family: Family::Rt, degree: 0 }, SpaceDescriptor { family: Family::Rt, degree: 1 }, SpaceDescriptor { family: Family::Bdm, degree: 1 }, SpaceDescriptor { family: Family::Bdm, degree: 2 }];

    fn random_triangle(rng: &mut ChaCha8Rng) -> TriangleGeometry {
        loop {
            let v: [Point; 3] = std::array::from_fn(|_| Point::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)));
            let g = TriangleGeometry::new(v);
            if g.det > 0.3 {
                return g;
            }
        }
    }

    fn interpolate_local(desc: SpaceDescriptor, geom: &TriangleGeometry, f: &dyn Fn(&Point) -> Vec2, x: &Point) -> Vec2 {
        let dofs = dof_functionals(desc, geom, f, &MomentOptions::default()).unwrap();
        let (vals, _) = flux_basis(desc, geom, &geom.inverse_map(x)).unwrap();
        vals.iter().zip(&dofs).map(|(v, c)| v * *c).sum()
    }

    #[test]
    fn duality_on_random_triangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for desc in ALL {
            for _ in 0..3 {
                let geom = random_triangle(&mut rng);
                let el = flux_element(desc).unwrap();
                for j in 0..el.n_dofs() {
                    let phi = |x: &Point| flux_basis(desc, &geom, &geom.inverse_map(x)).unwrap().0[j];
                    let dofs = dof_functionals(desc, &geom, &phi, &MomentOptions::default()).unwrap();
                    for (i, d) in dofs.iter().enumerate() {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!((d - expect).abs() < 1e-12, "{desc} N_{i}(phi_{j}) = {d}");
                    }
                }
            }
        }
    }

    #[test]
    fn piola_divergence_matches_mapped_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for desc in ALL {
            let geom = random_triangle(&mut rng);
            let x = geom.map(&Point::new(0.25, 0.3));
            let (_, divs) = flux_basis(desc, &geom, &geom.inverse_map(&x)).unwrap();
            // Central differences are exact for quadratics up to rounding.
            let h = 1e-3;
            let val = |p: Point| flux_basis(desc, &geom, &geom.inverse_map(&p)).unwrap().0;
            let (xp, xm) = (val(x + Vec2::new(h, 0.0)), val(x - Vec2::new(h, 0.0)));
            let (yp, ym) = (val(x + Vec2::new(0.0, h)), val(x - Vec2::new(0.0, h)));
            for j in 0..divs.len() {
                let fd = (xp[j].x - xm[j].x + yp[j].y - ym[j].y) / (2.0 * h);
                assert!((fd - divs[j]).abs() < 1e-10 * (1.0 + divs[j].abs()), "{desc} {j}: {fd} vs {}", divs[j]);
            }
        }
    }

    #[test]
    fn rt0_normal_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let geom = random_triangle(&mut rng);
        let desc = SpaceDescriptor::rt(0);
        for i in 0..3 {
            let (n, len) = geom.edge_normal(i);
            let [a, b] = LOCAL_EDGES[i];
            for t in [0.1, 0.5, 0.9] {
                let x = geom.vertices[a] + (geom.vertices[b] - geom.vertices[a]) * t;
                let (vals, divs) = flux_basis(desc, &geom, &geom.inverse_map(&x)).unwrap();
                for j in 0..3 {
                    let expect = if i == j { 1.0 / len } else { 0.0 };
                    assert!((vals[j].dot(&n) - expect).abs() < 1e-12);
                    assert!((divs[j] - 1.0 / geom.area()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rt0_moments_of_constant_field() {
        let geom = reference_geometry();
        let m = dof_functionals(SpaceDescriptor::rt(0), &geom, &|_| Vec2::new(1.0, 0.0), &MomentOptions::default())
            .unwrap();
        assert!((m[0] - 1.0).abs() < 1e-14);
        assert!((m[1] + 1.0).abs() < 1e-14);
        assert!(m[2].abs() < 1e-14);
        for desc in ALL {
            let z = dof_functionals(desc, &geom, &|_| Vec2::zeros(), &MomentOptions::default()).unwrap();
            assert!(z.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn bdm1_reference_reproduces_constants() {
        let geom = reference_geometry();
        let desc = SpaceDescriptor::bdm(1);
        assert_eq!(flux_element(desc).unwrap().n_dofs(), 6);
        for xi in [Point::new(0.2, 0.3), Point::new(0.7, 0.1)] {
            let v = interpolate_local(desc, &geom, &|_| Vec2::new(1.0, 0.0), &xi);
            assert!((v - Vec2::new(1.0, 0.0)).norm() < 1e-13);
        }
        // Divergences of BDM1 basis functions are linear: second differences vanish.
        let d = |xi: Point| flux_element(desc).unwrap().eval_reference(&xi).1;
        let (a, b, c) = (d(Point::new(0.1, 0.1)), d(Point::new(0.3, 0.2)), d(Point::new(0.5, 0.3)));
        for j in 0..6 {
            assert!((a[j] - 2.0 * b[j] + c[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn polynomials_in_the_space_are_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let geom = random_triangle(&mut rng);
        let x = geom.map(&Point::new(0.3, 0.3));
        let cases: Vec<(SpaceDescriptor, Box<dyn Fn(&Point) -> Vec2>)> = vec![
            (SpaceDescriptor::rt(0), Box::new(|p: &Point| Vec2::new(p.x + 1.0, p.y - 2.0))),
            (SpaceDescriptor::rt(1), Box::new(|p: &Point| Vec2::new(p.x * p.x + p.y, p.x * p.y - 1.0))),
            (SpaceDescriptor::bdm(1), Box::new(|p: &Point| Vec2::new(p.y, 2.0 * p.x - p.y))),
            (SpaceDescriptor::bdm(2), Box::new(|p: &Point| Vec2::new(p.y * p.y, p.x * p.y + p.x))),
        ];
        for (desc, f) in cases {
            let v = interpolate_local(desc, &geom, f.as_ref(), &x);
            assert!((v - f(&x)).norm() < 1e-11, "{desc}");
        }
    }

    #[test]
    fn rt0_is_contained_in_bdm1() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let geom = random_triangle(&mut rng);
        for j in 0..3 {
            let phi = |x: &Point| flux_basis(SpaceDescriptor::rt(0), &geom, &geom.inverse_map(x)).unwrap().0[j];
            for xi in [Point::new(0.1, 0.2), Point::new(0.6, 0.3), Point::new(0.0, 1.0)] {
                let x = geom.map(&xi);
                let r = interpolate_local(SpaceDescriptor::bdm(1), &geom, &phi, &x) - phi(&x);
                assert!(r.norm() < 1e-12);
            }
        }
    }
}
