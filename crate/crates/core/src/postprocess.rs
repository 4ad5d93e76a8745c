//! Element-local potential recovery: `u*` in `P_{k+1}(K)` with
//! `(alpha grad u*, grad v)_K = (f, v)_K - <sigma_h . n, v>_dK` for all `v`
//! and `int_K u* = int_K u_h`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::coefficients::CoefficientField;
use crate::elements::{scalar_basis_physical, scalar_dim, SpaceDescriptor};
use crate::error::{Error, Result};
use crate::geometry::LOCAL_EDGES;
use crate::mesh::Mesh;
use crate::spaces::{edge_rule, element_rule, DofMap, FieldVector, ScalarFn};

/// Discontinuous `P_{k+1}` potential built per element.
#[derive(Debug, Clone)]
pub struct PostField {
    pub field: FieldVector,
}

impl PostField {
    pub fn degree(&self) -> usize {
        self.field.space().degree
    }

    /// Largest `|int_K (u* - u_h)| / |K|` over all triangles.
    pub fn mean_defect(&self, mesh: &Mesh, u_h: &FieldVector) -> f64 {
        let order = self.degree().max(u_h.space().degree);
        (0..mesh.n_triangles())
            .map(|t| {
                let geom = mesh.geometry(t);
                let rule = element_rule(&geom, order, &[], 0);
                let d: f64 = rule
                    .iter()
                    .map(|(xi, w)| w * (self.field.scalar_at(&geom, t, &xi).0 - u_h.scalar_at(&geom, t, &xi).0))
                    .sum();
                // Reference weights sum to 1/2, so int_K = det * d and |K| = det / 2.
                2.0 * d.abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Flux-space index `k` keying the recovery degree `k + 1`.
pub fn flux_index(desc: SpaceDescriptor) -> usize {
    desc.degree
}

pub fn stenberg_postprocess(
    mesh: &Mesh,
    coeff: &CoefficientField,
    sigma_h: &FieldVector,
    u_h: &FieldVector,
    f: ScalarFn,
) -> Result<PostField> {
    let flux = sigma_h.space();
    if !flux.is_flux() {
        return Err(Error::UnsupportedDegree { space: flux.to_string(), degree: flux.degree });
    }
    let deg = flux_index(flux) + 1;
    let dofmap = Arc::new(DofMap::build(mesh, SpaceDescriptor::scalar(deg))?);
    let n = scalar_dim(deg);
    let p = flux.poly_degree();
    let pu = u_h.space().degree;

    let blocks: Vec<Vec<f64>> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let sub = mesh.subdomain[t];
            let alpha = coeff.alpha_by_triangle[t];
            let mut k = DMatrix::<f64>::zeros(n + 1, n + 1);
            let mut rhs = DVector::<f64>::zeros(n + 1);

            for (xi, w) in element_rule(&geom, (2 * deg).max(deg + pu), &[], 0).iter() {
                let (v, g) = scalar_basis_physical(deg, &geom, &xi)?;
                let wd = w * geom.det;
                for i in 0..n {
                    for j in 0..n {
                        k[(i, j)] += wd * alpha * g[i].dot(&g[j]);
                    }
                    k[(i, n)] += wd * v[i];
                    k[(n, i)] += wd * v[i];
                }
                rhs[n] += wd * u_h.scalar_at(&geom, t, &xi).0;
            }
            for (xi, w) in element_rule(&geom, 2 * deg + 4, &[], 0).iter() {
                let (v, _) = scalar_basis_physical(deg, &geom, &xi)?;
                let fx = f(&geom.map(&xi), sub);
                for i in 0..n {
                    rhs[i] += w * geom.det * fx * v[i];
                }
            }
            for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (normal, len) = geom.edge_normal(e);
                let (pa, pb) = (geom.vertices[*a], geom.vertices[*b]);
                let rule = edge_rule(&pa, &pb, p + deg, &[], 0);
                for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                    let xi = geom.inverse_map(&(pa + (pb - pa) * s));
                    let sn = sigma_h.flux_at(&geom, t, &xi).0.dot(&normal);
                    let (v, _) = scalar_basis_physical(deg, &geom, &xi)?;
                    for i in 0..n {
                        rhs[i] -= w * len * sn * v[i];
                    }
                }
            }

            let x = k.lu().solve(&rhs).ok_or(Error::LocalSingularSystem(t))?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::LocalSingularSystem(t));
            }
            Ok(x.iter().take(n).copied().collect())
        })
        .collect::<Result<_>>()?;

    Ok(PostField { field: FieldVector::new(dofmap, blocks.concat())? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::MomentOptions;
    use crate::geometry::Point;
    use crate::mesh::{refine, RefinementSpec};
    use crate::spaces::{interpolate_flux, l2_project, QuadOptions};
    use nalgebra::Vector2;

    fn mesh() -> Mesh {
        refine(&Mesh::unit_square(), &RefinementSpec::uniform(2)).unwrap()
    }

    #[test]
    fn linear_potential_recovered_exactly() {
        let mesh = mesh();
        let c = CoefficientField::uniform(&mesh, 1.0).unwrap();
        let u = |p: &Point, _: usize| 1.0 + 2.0 * p.x - p.y;
        let sigma = interpolate_flux(&mesh, SpaceDescriptor::rt(0), &|_, _| Vector2::new(-2.0, 1.0), &MomentOptions::default())
            .unwrap();
        let u_h = l2_project(&mesh, 0, &u, &QuadOptions::default()).unwrap();
        let post = stenberg_postprocess(&mesh, &c, &sigma, &u_h, &|_, _| 0.0).unwrap();
        assert_eq!(post.degree(), 1);
        for t in 0..mesh.n_triangles() {
            let g = mesh.geometry(t);
            for xi in [Point::new(0.2, 0.3), Point::new(0.7, 0.1)] {
                let v = post.field.scalar_at(&g, t, &xi).0;
                assert!((v - u(&g.map(&xi), 0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_data_gives_element_means() {
        let mesh = mesh();
        let c = CoefficientField::uniform(&mesh, 3.0).unwrap();
        let dm = Arc::new(DofMap::build(&mesh, SpaceDescriptor::bdm(2)).unwrap());
        let u_h = l2_project(&mesh, 1, &|p: &Point, _| p.x * p.x + p.y, &QuadOptions::default()).unwrap();
        let post = stenberg_postprocess(&mesh, &c, &FieldVector::zeros(dm), &u_h, &|_, _| 0.0).unwrap();
        assert_eq!(post.degree(), 3);
        for t in 0..mesh.n_triangles() {
            let g = mesh.geometry(t);
            let mean = u_h.scalar_at(&g, t, &Point::new(1.0 / 3.0, 1.0 / 3.0)).0;
            for xi in [Point::new(0.1, 0.1), Point::new(0.5, 0.4)] {
                let (v, grad) = post.field.scalar_at(&g, t, &xi);
                assert!((v - mean).abs() < 1e-12 && grad.norm() < 1e-10);
            }
        }
        assert!(post.mean_defect(&mesh, &u_h) < 1e-12);
    }

    #[test]
    fn rejects_scalar_input() {
        let mesh = mesh();
        let c = CoefficientField::uniform(&mesh, 1.0).unwrap();
        let u_h = l2_project(&mesh, 0, &|_, _| 1.0, &QuadOptions::default()).unwrap();
        assert!(stenberg_postprocess(&mesh, &c, &u_h, &u_h, &|_, _| 0.0).is_err());
    }
}
