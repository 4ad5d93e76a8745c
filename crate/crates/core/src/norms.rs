//! Error norms: weighted L2 flux error, the discrete `||.||_{alpha,h}` flux
//! norm, the broken `|||.|||_{alpha,h}` potential norm and the weighted
//! H(div)-type norm.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::coefficients::CoefficientField;
use crate::geometry::Point;
use crate::mesh::{EdgeClass, Mesh};
use crate::spaces::{edge_rule, element_rule, FieldVector, ScalarFn, VectorFn};

#[derive(Debug, Clone)]
pub struct NormOptions {
    pub excess: usize,
    pub singular: Vec<Point>,
    /// Dyadic subdivision depth toward singular points.
    pub depth: usize,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self { excess: 4, singular: Vec::new(), depth: 6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementError {
    pub triangle_id: usize,
    pub h_k: f64,
    pub alpha_k: f64,
    /// `||alpha^{-1/2} (sigma - sigma_h)||_{0,K}^2`.
    pub err_l2_sq: f64,
    /// `h_K^2 ||alpha^{-1/2} (f - div sigma_h)||_{0,K}^2`.
    pub err_div_sq: f64,
}

/// Squared per-element weighted L2 flux errors.
pub fn flux_error_weighted_l2_elements(
    mesh: &Mesh,
    coeff: &CoefficientField,
    exact_sigma: VectorFn,
    sigma_h: &FieldVector,
    opts: &NormOptions,
) -> Vec<f64> {
    let p = sigma_h.space().poly_degree();
    (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let sub = mesh.subdomain[t];
            let rule = element_rule(&geom, 2 * p + opts.excess, &opts.singular, opts.depth);
            let sum: f64 = rule
                .iter()
                .map(|(xi, w)| {
                    let e = exact_sigma(&geom.map(&xi), sub) - sigma_h.flux_at(&geom, t, &xi).0;
                    w * e.norm_squared()
                })
                .sum();
            sum * geom.det / coeff.alpha_by_triangle[t]
        })
        .collect()
}

/// `||alpha^{-1/2} (sigma - sigma_h)||_0`.
pub fn flux_error_weighted_l2(
    mesh: &Mesh,
    coeff: &CoefficientField,
    exact_sigma: VectorFn,
    sigma_h: &FieldVector,
    opts: &NormOptions,
) -> f64 {
    flux_error_weighted_l2_elements(mesh, coeff, exact_sigma, sigma_h, opts).iter().sum::<f64>().sqrt()
}

/// `||alpha^{-1/2} tau_h||_0` of a discrete flux.
pub fn discrete_flux_weighted_l2(mesh: &Mesh, coeff: &CoefficientField, tau_h: &FieldVector) -> f64 {
    flux_error_weighted_l2(mesh, coeff, &|_, _| nalgebra::Vector2::zeros(), tau_h, &NormOptions { excess: 0, ..Default::default() })
}

/// `||tau_h||_{alpha,h}^2 = ||alpha^{-1/2} tau_h||^2 + sum_F h_F / alpha_FH ||tau_h . n||_F^2`.
pub fn discrete_flux_norm_alpha_h(mesh: &Mesh, coeff: &CoefficientField, tau_h: &FieldVector) -> f64 {
    let l2 = discrete_flux_weighted_l2(mesh, coeff, tau_h).powi(2);
    let p = tau_h.space().poly_degree();
    let edges: f64 = (0..mesh.n_edges())
        .into_par_iter()
        .map(|e| {
            let (t, _) = mesh.edge_triangles[e];
            let geom = mesh.geometry(t);
            let [a, b] = mesh.edges[e];
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let n = mesh.edge_normal(e);
            let h = mesh.h_edge[e];
            let rule = edge_rule(&pa, &pb, 2 * p, &[], 0);
            let sum: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(&s, &w)| {
                    let x = pa + (pb - pa) * s;
                    w * tau_h.flux_at(&geom, t, &geom.inverse_map(&x)).0.dot(&n).powi(2)
                })
                .sum();
            h * h * sum / coeff.alpha_harmonic_by_edge[e]
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    (l2 + edges).sqrt()
}

/// `|||u - u_field|||_{alpha,h}` with boundary terms measuring `u_field - g`.
pub fn potential_error_dg(
    mesh: &Mesh,
    coeff: &CoefficientField,
    exact_u: ScalarFn,
    exact_grad_u: VectorFn,
    g: ScalarFn,
    u_field: &FieldVector,
    opts: &NormOptions,
) -> f64 {
    let deg = u_field.space().degree;
    let volume: Vec<f64> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let sub = mesh.subdomain[t];
            let rule = element_rule(&geom, 2 * deg + opts.excess, &opts.singular, opts.depth);
            let sum: f64 = rule
                .iter()
                .map(|(xi, w)| {
                    let e = exact_grad_u(&geom.map(&xi), sub) - u_field.scalar_at(&geom, t, &xi).1;
                    w * e.norm_squared()
                })
                .sum();
            sum * geom.det * coeff.alpha_by_triangle[t]
        })
        .collect();
    let edges: Vec<f64> = (0..mesh.n_edges())
        .into_par_iter()
        .map(|e| {
            let [a, b] = mesh.edges[e];
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let rule = edge_rule(&pa, &pb, 2 * deg + opts.excess, &opts.singular, opts.depth);
            let (t0, t1) = mesh.edge_triangles[e];
            let g0 = mesh.geometry(t0);
            let s0 = mesh.subdomain[t0];
            let sum: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(&s, &w)| {
                    let x = pa + (pb - pa) * s;
                    let v0 = u_field.scalar_at(&g0, t0, &g0.inverse_map(&x)).0;
                    let jump = match (mesh.edge_class[e], t1) {
                        (EdgeClass::Interior, Some(t1)) => {
                            let g1 = mesh.geometry(t1);
                            let v1 = u_field.scalar_at(&g1, t1, &g1.inverse_map(&x)).0;
                            (v0 - exact_u(&x, s0)) - (v1 - exact_u(&x, mesh.subdomain[t1]))
                        }
                        _ => v0 - g(&x, s0),
                    };
                    w * jump * jump
                })
                .sum();
            sum * coeff.alpha_harmonic_by_edge[e]
        })
        .collect();
    (volume.iter().sum::<f64>() + edges.iter().sum::<f64>()).sqrt()
}

/// Per-element `h_K^2 ||alpha^{-1/2} (f - div sigma_h)||_{0,K}^2`.
pub fn divergence_error_elements(
    mesh: &Mesh,
    coeff: &CoefficientField,
    f: ScalarFn,
    sigma_h: &FieldVector,
    opts: &NormOptions,
) -> Vec<f64> {
    let p = sigma_h.space().poly_degree();
    (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let sub = mesh.subdomain[t];
            let rule = element_rule(&geom, 2 * p + opts.excess, &opts.singular, opts.depth);
            let sum: f64 = rule
                .iter()
                .map(|(xi, w)| {
                    let r = f(&geom.map(&xi), sub) - sigma_h.flux_at(&geom, t, &xi).1;
                    w * r * r
                })
                .sum();
            mesh.h_triangle[t].powi(2) * sum * geom.det / coeff.alpha_by_triangle[t]
        })
        .collect()
}

/// Per-element breakdown of the H(div)-type flux error.
pub fn element_errors(
    mesh: &Mesh,
    coeff: &CoefficientField,
    exact_sigma: VectorFn,
    f: ScalarFn,
    sigma_h: &FieldVector,
    opts: &NormOptions,
) -> Vec<ElementError> {
    let l2 = flux_error_weighted_l2_elements(mesh, coeff, exact_sigma, sigma_h, opts);
    let div = divergence_error_elements(mesh, coeff, f, sigma_h, opts);
    (0..mesh.n_triangles())
        .map(|t| ElementError {
            triangle_id: t,
            h_k: mesh.h_triangle[t],
            alpha_k: coeff.alpha_by_triangle[t],
            err_l2_sq: l2[t],
            err_div_sq: div[t],
        })
        .collect()
}

/// `(||sigma - sigma_h||_{alpha,h,H(div)}, divergence part)` from a breakdown.
pub fn hdiv_from_elements(elements: &[ElementError]) -> (f64, f64) {
    let l2: f64 = elements.iter().map(|e| e.err_l2_sq).sum();
    let div: f64 = elements.iter().map(|e| e.err_div_sq).sum();
    ((l2 + div).sqrt(), div.sqrt())
}

/// `||sigma - sigma_h||_{alpha,h,H(div)}` using `div sigma = f`.
pub fn flux_error_hdiv_alpha_h(
    mesh: &Mesh,
    coeff: &CoefficientField,
    exact_sigma: VectorFn,
    f: ScalarFn,
    sigma_h: &FieldVector,
    opts: &NormOptions,
) -> f64 {
    hdiv_from_elements(&element_errors(mesh, coeff, exact_sigma, f, sigma_h, opts)).0
}

pub fn element_errors_csv(elements: &[ElementError]) -> String {
    let mut out = String::from("triangle_id,h_K,alpha_K,err_l2_sq,err_div_sq\n");
    for e in elements {
        writeln!(out, "{},{:e},{:e},{:e},{:e}", e.triangle_id, e.h_k, e.alpha_k, e.err_l2_sq, e.err_div_sq).unwrap();
    }
    out
}

/// Element-wise equilibration check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibration {
    /// `max_K ||div sigma_h - Q_h f||_{0,K} / |K|^{1/2}`.
    pub max_defect: f64,
    /// `max_K ||Q_h f||_{0,K} / |K|^{1/2}`.
    pub load_scale: f64,
    /// `max_K ||sigma_h||_{0,K} / (h_K |K|^{1/2})`, the size of the divergence
    /// of an unequilibrated field; used when the load vanishes.
    pub flux_scale: f64,
}

impl Equilibration {
    /// Defect relative to the load scale, or to the flux scale when the load vanishes.
    pub fn relative(&self) -> f64 {
        let scale = if self.load_scale > 0.0 { self.load_scale } else { self.flux_scale };
        if scale > 0.0 {
            self.max_defect / scale
        } else {
            self.max_defect
        }
    }
}

/// Compares `div sigma_h` with the projection `q_h = Q_h f` on every element.
pub fn equilibration(mesh: &Mesh, sigma_h: &FieldVector, q_h: &FieldVector) -> Equilibration {
    let order = 2 * sigma_h.space().poly_degree().max(q_h.space().degree);
    let per: Vec<[f64; 3]> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let (mut d, mut l, mut s) = (0.0, 0.0, 0.0);
            for (xi, w) in element_rule(&geom, order.max(1), &[], 0).iter() {
                let q = q_h.scalar_at(&geom, t, &xi).0;
                let (v, div) = sigma_h.flux_at(&geom, t, &xi);
                d += w * (div - q).powi(2);
                l += w * q * q;
                s += w * v.norm_squared();
            }
            // Mean squares over K: reference weights sum to 1/2.
            [(2.0 * d).sqrt(), (2.0 * l).sqrt(), (2.0 * s).sqrt() / mesh.h_triangle[t]]
        })
        .collect();
    let max = |i: usize| per.iter().map(|p| p[i]).fold(0.0, f64::max);
    Equilibration { max_defect: max(0), load_scale: max(1), flux_scale: max(2) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::SpaceDescriptor;
    use crate::mesh::{refine, RefinementSpec};
    use crate::spaces::DofMap;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn square(levels: usize) -> Mesh {
        refine(&Mesh::unit_square(), &RefinementSpec::uniform(levels)).unwrap()
    }

    #[test]
    fn zero_field_norms() {
        let mesh = square(1);
        let c = CoefficientField::uniform(&mesh, 2.0).unwrap();
        let dm = Arc::new(DofMap::build(&mesh, SpaceDescriptor::rt(0)).unwrap());
        assert_eq!(discrete_flux_norm_alpha_h(&mesh, &c, &FieldVector::zeros(dm)), 0.0);
    }

    #[test]
    fn alpha_h_norm_dominates_weighted_l2() {
        let mesh = square(2);
        let c = CoefficientField::uniform(&mesh, 1.0).unwrap();
        let dm = Arc::new(DofMap::build(&mesh, SpaceDescriptor::rt(0)).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let v = (0..dm.n_global).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tau = FieldVector::new(dm.clone(), v).unwrap();
            assert!(discrete_flux_norm_alpha_h(&mesh, &c, &tau) >= discrete_flux_weighted_l2(&mesh, &c, &tau));
        }
    }

    #[test]
    fn zero_field_gives_energy_of_u() {
        let mesh = square(3);
        let c = CoefficientField::uniform(&mesh, 1.0).unwrap();
        let dm = Arc::new(DofMap::build(&mesh, SpaceDescriptor::scalar(1)).unwrap());
        let u = |p: &Point, _: usize| (PI * p.x).sin() * (PI * p.y).sin();
        let grad = |p: &Point, _: usize| {
            PI * nalgebra::Vector2::new((PI * p.x).cos() * (PI * p.y).sin(), (PI * p.x).sin() * (PI * p.y).cos())
        };
        let v = potential_error_dg(&mesh, &c, &u, &grad, &|_, _| 0.0, &FieldVector::zeros(dm), &NormOptions::default());
        assert!((v - PI / 2f64.sqrt()).abs() < 1e-10, "{v}");
    }

    #[test]
    fn weighted_l2_scales_with_alpha() {
        let mesh = square(1);
        let c1 = CoefficientField::uniform(&mesh, 1.0).unwrap();
        let c4 = CoefficientField::uniform(&mesh, 4.0).unwrap();
        let dm = Arc::new(DofMap::build(&mesh, SpaceDescriptor::rt(0)).unwrap());
        let sigma = |p: &Point, _: usize| nalgebra::Vector2::new(p.y.exp(), p.x);
        let zero = FieldVector::zeros(dm);
        let a = flux_error_weighted_l2(&mesh, &c1, &sigma, &zero, &NormOptions::default());
        let b = flux_error_weighted_l2(&mesh, &c4, &sigma, &zero, &NormOptions::default());
        assert!((b - a / 2.0).abs() < 1e-14 * a);
    }

    #[test]
    fn csv_layout() {
        let e = ElementError { triangle_id: 3, h_k: 0.5, alpha_k: 1.0, err_l2_sq: 1e-3, err_div_sq: 0.0 };
        let csv = element_errors_csv(&[e]);
        assert!(csv.starts_with("triangle_id,h_K,alpha_K,err_l2_sq,err_div_sq\n3,"));
        assert_eq!(hdiv_from_elements(&[e]).1, 0.0);
    }
}
