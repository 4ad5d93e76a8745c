//! Global DOF numbering, flux interpolation and scalar L2 projection.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::elements::quadrature::{line_refined_toward, quadrature_clamped, refined_toward, LineRule};
use crate::elements::{
    dof_functionals, flux_element, scalar_basis, scalar_basis_physical, scalar_dim, MomentOptions, QuadratureRule,
    SpaceDescriptor,
};
use crate::error::{Error, Result};
use crate::geometry::{Point, TriangleGeometry, Vec2, LOCAL_EDGES};
use crate::mesh::Mesh;

/// Scalar field of position and subdomain id.
pub type ScalarFn<'a> = &'a (dyn Fn(&Point, usize) -> f64 + Sync);
/// Vector field of position and subdomain id.
pub type VectorFn<'a> = &'a (dyn Fn(&Point, usize) -> Vec2 + Sync);

/// Global numbering of a flux or discontinuous scalar space.
///
/// Flux DOF `m` on edge `e` is `e * (k + 1) + m`; interior DOF `j` of
/// triangle `t` is `n_edges * (k + 1) + t * n_interior + j`. Scalar DOF `j`
/// of triangle `t` is `t * dim + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub space: SpaceDescriptor,
    pub n_global: usize,
    pub local_dim: usize,
    indices: Vec<usize>,
    signs: Vec<f64>,
}

impl DofMap {
    pub fn build(mesh: &Mesh, space: SpaceDescriptor) -> Result<Self> {
        space.validate()?;
        let local_dim = space.local_dim();
        let nt = mesh.n_triangles();
        let mut indices = Vec::with_capacity(nt * local_dim);
        let mut signs = Vec::with_capacity(nt * local_dim);
        if !space.is_flux() {
            indices.extend(0..nt * local_dim);
            signs.resize(nt * local_dim, 1.0);
            return Ok(Self { space, n_global: nt * local_dim, local_dim, indices, signs });
        }
        let per_edge = space.edge_dofs();
        let n_int = space.interior_dofs();
        let offset = mesh.n_edges() * per_edge;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for (i, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let e = mesh.triangle_edges[t][i];
                let reversed = tri[*a] > tri[*b];
                for m in 0..per_edge {
                    indices.push(e * per_edge + m);
                    let flip = if reversed && m % 2 == 1 { -1.0 } else { 1.0 };
                    signs.push(mesh.triangle_edge_signs[t][i] * flip);
                }
            }
            for j in 0..n_int {
                indices.push(offset + t * n_int + j);
                signs.push(1.0);
            }
        }
        Ok(Self { space, n_global: offset + nt * n_int, local_dim, indices, signs })
    }

    pub fn dofs(&self, t: usize) -> &[usize] {
        &self.indices[t * self.local_dim..(t + 1) * self.local_dim]
    }

    pub fn signs(&self, t: usize) -> &[f64] {
        &self.signs[t * self.local_dim..(t + 1) * self.local_dim]
    }

    pub fn n_triangles(&self) -> usize {
        self.indices.len() / self.local_dim
    }
}

/// Coefficients of a discrete field in a [`DofMap`].
#[derive(Debug, Clone)]
pub struct FieldVector {
    pub dofmap: Arc<DofMap>,
    pub coefficients: Vec<f64>,
}

impl FieldVector {
    pub fn new(dofmap: Arc<DofMap>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != dofmap.n_global {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} DOFs",
                coefficients.len(),
                dofmap.n_global
            )));
        }
        Ok(Self { dofmap, coefficients })
    }

    pub fn zeros(dofmap: Arc<DofMap>) -> Self {
        let n = dofmap.n_global;
        Self { dofmap, coefficients: vec![0.0; n] }
    }

    pub fn space(&self) -> SpaceDescriptor {
        self.dofmap.space
    }

    /// Coefficients with respect to the local (outward-oriented) basis of `t`.
    pub fn local(&self, t: usize) -> Vec<f64> {
        self.dofmap
            .dofs(t)
            .iter()
            .zip(self.dofmap.signs(t))
            .map(|(&g, &s)| s * self.coefficients[g])
            .collect()
    }

    /// Flux value and divergence at reference point `xi` of triangle `t`.
    pub fn flux_at(&self, geom: &TriangleGeometry, t: usize, xi: &Point) -> (Vec2, f64) {
        let el = flux_element(self.space()).expect("flux space");
        let (vals, divs) = el.eval(geom, xi);
        let c = self.local(t);
        let v = vals.iter().zip(&c).map(|(v, c)| v * *c).sum();
        let d = divs.iter().zip(&c).map(|(d, c)| d * c).sum();
        (v, d)
    }

    /// Scalar value and physical gradient at reference point `xi` of triangle `t`.
    pub fn scalar_at(&self, geom: &TriangleGeometry, t: usize, xi: &Point) -> (f64, Vec2) {
        let (vals, grads) = scalar_basis_physical(self.space().degree, geom, xi).expect("scalar space");
        let c = self.local(t);
        let v = vals.iter().zip(&c).map(|(v, c)| v * c).sum();
        let g = grads.iter().zip(&c).map(|(g, c)| g * *c).sum();
        (v, g)
    }
}

/// Quadrature on triangle `t` of `mesh`, subdivided toward any of `singular`
/// that the triangle contains.
pub fn element_rule(geom: &TriangleGeometry, order: usize, singular: &[Point], depth: usize) -> QuadratureRule {
    let local: Vec<Point> = singular.iter().filter(|s| geom.contains(s)).map(|s| geom.inverse_map(s)).collect();
    if local.is_empty() {
        quadrature_clamped(order).clone()
    } else {
        refined_toward(order, &local, depth)
    }
}

/// Gauss rule on the segment `pa -> pb` (parameter in `[0, 1]`), graded
/// toward any of `singular` lying on the segment.
pub fn edge_rule(pa: &Point, pb: &Point, order: usize, singular: &[Point], depth: usize) -> LineRule {
    let d = pb - pa;
    let len = d.norm();
    let params: Vec<f64> = singular
        .iter()
        .filter_map(|s| {
            let t = ((s - pa).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            ((s - (pa + d * t)).norm() <= 1e-12 * len).then_some(t)
        })
        .collect();
    line_refined_toward(order, &params, depth)
}

/// Canonical interpolant: global DOFs are the moment functionals. Each edge
/// DOF is computed once, by the lower-indexed incident triangle.
pub fn interpolate_flux(mesh: &Mesh, desc: SpaceDescriptor, field: VectorFn, opts: &MomentOptions) -> Result<FieldVector> {
    let dofmap = Arc::new(DofMap::build(mesh, desc)?);
    if !desc.is_flux() {
        return Err(Error::UnsupportedDegree { space: desc.to_string(), degree: desc.degree });
    }
    let local: Vec<Vec<f64>> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let sub = mesh.subdomain[t];
            dof_functionals(desc, &mesh.geometry(t), &|x: &Point| field(x, sub), opts)
        })
        .collect::<Result<_>>()?;
    let mut coefficients = vec![0.0; dofmap.n_global];
    let per_edge = desc.edge_dofs();
    for (t, values) in local.iter().enumerate() {
        let dofs = dofmap.dofs(t);
        let signs = dofmap.signs(t);
        for (i, v) in values.iter().enumerate() {
            let owner = if i < 3 * per_edge {
                mesh.edge_triangles[mesh.triangle_edges[t][i / per_edge]].0 == t
            } else {
                true
            };
            if owner {
                coefficients[dofs[i]] = signs[i] * v;
            }
        }
    }
    FieldVector::new(dofmap, coefficients)
}

/// Inverse of the reference-triangle Gram matrix of the `P_k` basis.
fn reference_gram_inverse(k: usize) -> &'static DMatrix<f64> {
    static CACHE: [OnceLock<DMatrix<f64>>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    CACHE[k].get_or_init(|| {
        let n = scalar_dim(k);
        let mut gram = DMatrix::zeros(n, n);
        for (xi, w) in quadrature_clamped(2 * k).iter() {
            let (v, _) = scalar_basis(k, &xi).expect("supported degree");
            for i in 0..n {
                for j in 0..n {
                    gram[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        gram.cholesky().expect("SPD Gram").inverse()
    })
}

/// Options for integrating non-polynomial data.
#[derive(Debug, Clone)]
pub struct QuadOptions {
    pub excess: usize,
    pub singular: Vec<Point>,
    pub depth: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { excess: 4, singular: Vec::new(), depth: 4 }
    }
}

/// Element-wise L2 projection onto `D_k`.
pub fn l2_project(mesh: &Mesh, k: usize, f: ScalarFn, opts: &QuadOptions) -> Result<FieldVector> {
    let desc = SpaceDescriptor::scalar(k);
    let dofmap = Arc::new(DofMap::build(mesh, desc)?);
    let ginv = reference_gram_inverse(k);
    let n = scalar_dim(k);
    let blocks: Vec<Vec<f64>> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let sub = mesh.subdomain[t];
            let rule = element_rule(&geom, 2 * k + opts.excess + 2, &opts.singular, opts.depth);
            let mut rhs = DVector::zeros(n);
            for (xi, w) in rule.iter() {
                let (v, _) = scalar_basis(k, &xi).expect("supported degree");
                let fx = f(&geom.map(&xi), sub);
                for i in 0..n {
                    rhs[i] += w * fx * v[i];
                }
            }
            (ginv * rhs).iter().copied().collect()
        })
        .collect();
    FieldVector::new(dofmap, blocks.concat())
}

/// Maximum over quadrature points of `|div(I_h tau) - Q_h div tau|`.
pub fn check_commuting(
    mesh: &Mesh,
    desc: SpaceDescriptor,
    field: VectorFn,
    divergence: ScalarFn,
    opts: &MomentOptions,
) -> Result<f64> {
    let interp = interpolate_flux(mesh, desc, field, opts)?;
    let k = desc.divergence_degree().expect("flux space");
    let qopts = QuadOptions { excess: opts.excess, singular: opts.singular.clone(), depth: opts.depth };
    let proj = l2_project(mesh, k, divergence, &qopts)?;
    let defect = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            quadrature_clamped(2 * desc.poly_degree() + 2)
                .iter()
                .map(|(xi, _)| {
                    let (_, d) = interp.flux_at(&geom, t, &xi);
                    let (q, _) = proj.scalar_at(&geom, t, &xi);
                    (d - q).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(defect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{refine, RefinementSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fine_square(levels: usize) -> Mesh {
        let m = Mesh::unit_square();
        if levels == 0 {
            m
        } else {
            refine(&m, &RefinementSpec::uniform(levels)).unwrap()
        }
    }

    /// Evaluates a discrete flux at a physical point.
    fn flux_value(mesh: &Mesh, fv: &FieldVector, x: &Point) -> Vec2 {
        let t = (0..mesh.n_triangles()).find(|&t| mesh.geometry(t).contains(x)).unwrap();
        let g = mesh.geometry(t);
        fv.flux_at(&g, t, &g.inverse_map(x)).0
    }

    #[test]
    fn dofmap_sizes() {
        let mesh = Mesh::unit_square();
        assert_eq!(DofMap::build(&mesh, SpaceDescriptor::rt(0)).unwrap().n_global, 5);
        assert_eq!(DofMap::build(&mesh, SpaceDescriptor::bdm(1)).unwrap().n_global, 10);
        assert_eq!(DofMap::build(&mesh, SpaceDescriptor::scalar(1)).unwrap().n_global, 6);
        assert_eq!(DofMap::build(&mesh, SpaceDescriptor::rt(1)).unwrap().n_global, 14);
    }

    #[test]
    fn reproduces_fields_in_the_space() {
        let mesh = fine_square(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cases: [(SpaceDescriptor, fn(&Point, usize) -> Vec2); 3] = [
            (SpaceDescriptor::rt(0), |_, _| Vec2::new(1.0, 0.0)),
            (SpaceDescriptor::rt(0), |p, _| Vec2::new(p.x, p.y)),
            (SpaceDescriptor::bdm(2), |p, _| Vec2::new(p.x * p.y, p.y * p.y - p.x)),
        ];
        for (desc, f) in cases {
            let fv = interpolate_flux(&mesh, desc, &f, &MomentOptions::default()).unwrap();
            for _ in 0..20 {
                let x = Point::new(rng.random(), rng.random());
                assert!((flux_value(&mesh, &fv, &x) - f(&x, 0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rt0_preserves_edge_fluxes() {
        let mesh = fine_square(1);
        let f = |p: &Point, _: usize| Vec2::new(p.x * p.x, p.x * p.y);
        let fv = interpolate_flux(&mesh, SpaceDescriptor::rt(0), &f, &MomentOptions::default()).unwrap();
        let gl = crate::elements::quadrature::line_rule(6);
        for e in 0..mesh.n_edges() {
            let [a, b] = mesh.edges[e];
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let n = mesh.edge_normal(e);
            let (t0, _) = mesh.edge_triangles[e];
            let g = mesh.geometry(t0);
            let (mut exact, mut interp) = (0.0, 0.0);
            for (&s, &w) in gl.points.iter().zip(&gl.weights) {
                let x = pa + (pb - pa) * s;
                exact += w * f(&x, 0).dot(&n);
                interp += w * fv.flux_at(&g, t0, &g.inverse_map(&x)).0.dot(&n);
            }
            assert!((exact - interp).abs() < 1e-12);
        }
        let x = Point::new(0.3, 0.1);
        assert!((flux_value(&mesh, &fv, &x) - f(&x, 0)).norm() > 1e-3);
    }

    #[test]
    fn normal_components_match_across_edges() {
        let mesh = fine_square(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for desc in [SpaceDescriptor::rt(1), SpaceDescriptor::bdm(2)] {
            let dm = Arc::new(DofMap::build(&mesh, desc).unwrap());
            let coeffs = (0..dm.n_global).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fv = FieldVector::new(dm, coeffs).unwrap();
            for e in 0..mesh.n_edges() {
                if let (t0, Some(t1)) = mesh.edge_triangles[e] {
                    let [a, b] = mesh.edges[e];
                    let x = mesh.vertices[a] + (mesh.vertices[b] - mesh.vertices[a]) * 0.3;
                    let n = mesh.edge_normal(e);
                    let (g0, g1) = (mesh.geometry(t0), mesh.geometry(t1));
                    let v0 = fv.flux_at(&g0, t0, &g0.inverse_map(&x)).0.dot(&n);
                    let v1 = fv.flux_at(&g1, t1, &g1.inverse_map(&x)).0.dot(&n);
                    assert!((v0 - v1).abs() < 1e-12, "{desc} edge {e}: {v0} vs {v1}");
                }
            }
        }
    }

    #[test]
    fn projection_examples() {
        let mesh = fine_square(1);
        let ones = l2_project(&mesh, 0, &|_, _| 1.0, &QuadOptions::default()).unwrap();
        assert!(ones.coefficients.iter().all(|c| (c - 1.0).abs() < 1e-14));
        let xs = l2_project(&mesh, 0, &|p, _| p.x, &QuadOptions::default()).unwrap();
        for t in 0..mesh.n_triangles() {
            assert!((xs.coefficients[t] - mesh.geometry(t).centroid().x).abs() < 1e-14);
        }
        // Residual of the best linear fit to x^2 is orthogonal to P_1.
        let reference = Mesh::new(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)],
            vec![[0, 1, 2]],
            vec![0],
        )
        .unwrap();
        let fit = l2_project(&reference, 1, &|p, _| p.x * p.x, &QuadOptions::default()).unwrap();
        let g = reference.geometry(0);
        for i in 0..3 {
            let r: f64 = quadrature_clamped(6)
                .iter()
                .map(|(xi, w)| {
                    let (v, _) = scalar_basis(1, &xi).unwrap();
                    w * (xi.x * xi.x - fit.scalar_at(&g, 0, &xi).0) * v[i]
                })
                .sum();
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn commuting_examples() {
        let mesh = fine_square(2);
        let opts = MomentOptions::default();
        let d = check_commuting(&mesh, SpaceDescriptor::rt(0), &|p, _| Vec2::new(p.x * p.x, p.x * p.y), &|p, _| 3.0 * p.x, &opts)
            .unwrap();
        assert!(d < 1e-10, "{d}");
        let d = check_commuting(&mesh, SpaceDescriptor::rt(0), &|_, _| Vec2::new(2.0, -1.0), &|_, _| 0.0, &opts).unwrap();
        assert!(d < 1e-14 * 100.0, "{d}");
        let opts6 = MomentOptions { excess: 6, ..MomentOptions::default() };
        let d = check_commuting(
            &mesh,
            SpaceDescriptor::rt(1),
            &|p, _| Vec2::new(p.y.sin(), p.x.cos()),
            &|_, _| 0.0,
            &opts6,
        )
        .unwrap();
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn interpolation_is_local() {
        let mesh = fine_square(2);
        let target = 5;
        let g = mesh.geometry(target);
        let full = |p: &Point, _: usize| Vec2::new(p.x.exp(), p.y * p.x);
        let cut = |p: &Point, s: usize| if g.contains(p) { full(p, s) } else { Vec2::zeros() };
        let desc = SpaceDescriptor::rt(1);
        let a = interpolate_flux(&mesh, desc, &full, &MomentOptions::default()).unwrap();
        let b = interpolate_flux(&mesh, desc, &cut, &MomentOptions::default()).unwrap();
        let dm = DofMap::build(&mesh, desc).unwrap();
        let own: Vec<usize> = dm.dofs(target).to_vec();
        for i in 0..dm.n_global {
            if own.contains(&i) {
                assert!((a.coefficients[i] - b.coefficients[i]).abs() < 1e-14);
            } else {
                assert_eq!(b.coefficients[i], 0.0);
            }
        }
    }
}
