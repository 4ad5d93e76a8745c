//! Mixed saddle-point system
//!
//! ```text
//! A sigma - B^T u = F_flux,   A_ij = (alpha^-1 phi_j, phi_i),   F_flux_i = -<g, phi_i . n>
//! B sigma         = F_pot,    B_ij = (div phi_j, psi_i),        F_pot_i  = (f, psi_i)
//! ```

use std::sync::Arc;

use rayon::prelude::*;

use crate::coefficients::CoefficientField;
use crate::elements::{flux_element, scalar_basis, Family, SpaceDescriptor};
use crate::error::{Error, Result};
use crate::geometry::{Point, LOCAL_EDGES};
use crate::mesh::{EdgeClass, Mesh};
use crate::spaces::{edge_rule, element_rule, DofMap, ScalarFn};
use crate::sparse::{CsrMatrix, Triplets};

#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub f_flux: Vec<f64>,
    pub f_pot: Vec<f64>,
    pub flux_dofs: Arc<DofMap>,
    pub pot_dofs: Arc<DofMap>,
}

impl SaddleSystem {
    pub fn n_flux(&self) -> usize {
        self.flux_dofs.n_global
    }

    pub fn n_pot(&self) -> usize {
        self.pot_dofs.n_global
    }

    /// Matrix Market dumps of `A` and `B`.
    pub fn to_matrix_market(&self) -> (String, String) {
        (self.a.to_matrix_market(), self.b.to_matrix_market())
    }
}

#[derive(Debug, Clone)]
pub struct AssemblyOptions {
    /// Orders added for non-polynomial data.
    pub excess: usize,
    pub singular: Vec<Point>,
    pub depth: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { excess: 4, singular: Vec::new(), depth: 4 }
    }
}

/// `(RT_k, D_k)` and `(BDM_{k+1}, D_k)` are the supported stable pairs.
pub fn check_stable_pair(flux: SpaceDescriptor, pot_degree: usize) -> Result<()> {
    flux.validate()?;
    let ok = match flux.family {
        Family::Rt => flux.degree == pot_degree,
        Family::Bdm => flux.degree == pot_degree + 1,
        Family::DiscontinuousScalar => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::UnstablePair { flux: flux.to_string(), potential: pot_degree })
    }
}

struct LocalBlocks {
    a: Vec<(usize, usize, f64)>,
    b: Vec<(usize, usize, f64)>,
    f_flux: Vec<(usize, f64)>,
    f_pot: Vec<(usize, f64)>,
}

pub fn assemble_system(
    mesh: &Mesh,
    coeff: &CoefficientField,
    flux: SpaceDescriptor,
    pot_degree: usize,
    f: ScalarFn,
    g: ScalarFn,
    opts: &AssemblyOptions,
) -> Result<SaddleSystem> {
    check_stable_pair(flux, pot_degree)?;
    let flux_dofs = Arc::new(DofMap::build(mesh, flux)?);
    let pot_dofs = Arc::new(DofMap::build(mesh, SpaceDescriptor::scalar(pot_degree))?);
    let el = flux_element(flux)?;
    let p = flux.poly_degree();

    let locals: Vec<LocalBlocks> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let sub = mesh.subdomain[t];
            let inv_alpha = 1.0 / coeff.alpha_by_triangle[t];
            let fd = flux_dofs.dofs(t);
            let fs = flux_dofs.signs(t);
            let pd = pot_dofs.dofs(t);
            let nf = fd.len();
            let np = pd.len();

            let mut a_loc = vec![0.0; nf * nf];
            let mut b_loc = vec![0.0; np * nf];
            let poly_rule = element_rule(&geom, (2 * p).max(p + pot_degree).max(1), &[], 0);
            for (xi, w) in poly_rule.iter() {
                let (vals, divs) = el.eval(&geom, &xi);
                let (psi, _) = scalar_basis(pot_degree, &xi).expect("stable pair degree");
                let wd = w * geom.det;
                for i in 0..nf {
                    for j in 0..nf {
                        a_loc[i * nf + j] += wd * inv_alpha * vals[i].dot(&vals[j]);
                    }
                }
                for i in 0..np {
                    for j in 0..nf {
                        b_loc[i * nf + j] += wd * psi[i] * divs[j];
                    }
                }
            }

            let mut f_pot = vec![0.0; np];
            // Same rule as `l2_project`, so that `div sigma_h = Q_h f` holds discretely.
            let load_rule = element_rule(&geom, 2 * pot_degree + opts.excess + 2, &opts.singular, opts.depth);
            for (xi, w) in load_rule.iter() {
                let (psi, _) = scalar_basis(pot_degree, &xi).expect("stable pair degree");
                let fx = f(&geom.map(&xi), sub);
                for i in 0..np {
                    f_pot[i] += w * geom.det * fx * psi[i];
                }
            }

            let mut f_flux = vec![0.0; nf];
            for (i, [va, vb]) in LOCAL_EDGES.iter().enumerate() {
                if mesh.edge_class[mesh.triangle_edges[t][i]] != EdgeClass::Dirichlet {
                    continue;
                }
                let (n, len) = geom.edge_normal(i);
                let (pa, pb) = (geom.vertices[*va], geom.vertices[*vb]);
                let rule = edge_rule(&pa, &pb, p + opts.excess, &opts.singular, opts.depth);
                for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                    let x = pa + (pb - pa) * s;
                    let (vals, _) = el.eval(&geom, &geom.inverse_map(&x));
                    let gx = g(&x, sub);
                    for j in 0..nf {
                        f_flux[j] -= w * len * gx * vals[j].dot(&n);
                    }
                }
            }

            let mut out = LocalBlocks {
                a: Vec::with_capacity(nf * nf),
                b: Vec::with_capacity(np * nf),
                f_flux: Vec::with_capacity(nf),
                f_pot: Vec::with_capacity(np),
            };
            for i in 0..nf {
                for j in 0..nf {
                    out.a.push((fd[i], fd[j], fs[i] * fs[j] * a_loc[i * nf + j]));
                }
                if f_flux[i] != 0.0 {
                    out.f_flux.push((fd[i], fs[i] * f_flux[i]));
                }
            }
            for i in 0..np {
                for j in 0..nf {
                    out.b.push((pd[i], fd[j], fs[j] * b_loc[i * nf + j]));
                }
                out.f_pot.push((pd[i], f_pot[i]));
            }
            out
        })
        .collect();

    let (nf, np) = (flux_dofs.n_global, pot_dofs.n_global);
    let mut a = Triplets::new(nf, nf);
    let mut b = Triplets::new(np, nf);
    let mut f_flux = vec![0.0; nf];
    let mut f_pot = vec![0.0; np];
    for l in locals {
        a.entries.extend(l.a);
        b.entries.extend(l.b);
        for (i, v) in l.f_flux {
            f_flux[i] += v;
        }
        for (i, v) in l.f_pot {
            f_pot[i] += v;
        }
    }
    Ok(SaddleSystem {
        a: CsrMatrix::from_triplets(&a),
        b: CsrMatrix::from_triplets(&b),
        f_flux,
        f_pot,
        flux_dofs,
        pot_dofs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(mesh: &Mesh) -> CoefficientField {
        CoefficientField::uniform(mesh, 1.0).unwrap()
    }

    #[test]
    fn two_triangle_structure() {
        let mesh = Mesh::unit_square();
        let sys = assemble_system(&mesh, &unit(&mesh), SpaceDescriptor::rt(0), 0, &|_, _| 0.0, &|_, _| 0.0, &AssemblyOptions::default())
            .unwrap();
        assert_eq!((sys.a.nrows, sys.a.ncols), (5, 5));
        assert_eq!((sys.b.nrows, sys.b.ncols), (2, 5));
        assert!(sys.a.symmetry_defect() < 1e-12);
        assert!(sys.a.to_dense().cholesky().is_some());
        for t in 0..2 {
            let row: Vec<_> = sys.b.row(t).filter(|(_, v)| *v != 0.0).collect();
            assert_eq!(row.len(), 3);
            // (div phi_e, 1)_K = +-1 for each edge e of K.
            for (_, v) in row {
                assert!((v.abs() - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn unstable_pairs_rejected() {
        assert!(matches!(check_stable_pair(SpaceDescriptor::rt(0), 1), Err(Error::UnstablePair { .. })));
        assert!(matches!(check_stable_pair(SpaceDescriptor::bdm(1), 1), Err(Error::UnstablePair { .. })));
        check_stable_pair(SpaceDescriptor::bdm(2), 1).unwrap();
        check_stable_pair(SpaceDescriptor::rt(1), 1).unwrap();
    }

    #[test]
    fn b_rows_are_local() {
        let mesh = crate::mesh::refine(&Mesh::unit_square(), &crate::mesh::RefinementSpec::uniform(2)).unwrap();
        let sys =
            assemble_system(&mesh, &unit(&mesh), SpaceDescriptor::bdm(2), 1, &|_, _| 1.0, &|_, _| 0.0, &AssemblyOptions::default())
                .unwrap();
        for t in 0..mesh.n_triangles() {
            let own = sys.flux_dofs.dofs(t);
            for &r in sys.pot_dofs.dofs(t) {
                for (c, _) in sys.b.row(r) {
                    assert!(own.contains(&c));
                }
            }
        }
    }

    #[test]
    fn alpha_scaling_scales_a_only() {
        let mesh = Mesh::rectangle((-1.0, 1.0), (0.0, 1.0), 2, 1, |p| usize::from(p.x > 0.0)).unwrap();
        let c1 = CoefficientField::build(&mesh, &[(0, 1.0), (1, 10.0)].into_iter().collect()).unwrap();
        let c2 = c1.scaled(&mesh, 4.0).unwrap();
        let opts = AssemblyOptions::default();
        let s1 = assemble_system(&mesh, &c1, SpaceDescriptor::rt(1), 1, &|_, _| 1.0, &|_, _| 0.0, &opts).unwrap();
        let s2 = assemble_system(&mesh, &c2, SpaceDescriptor::rt(1), 1, &|_, _| 1.0, &|_, _| 0.0, &opts).unwrap();
        for (x, y) in s1.a.values.iter().zip(&s2.a.values) {
            assert!((x / 4.0 - y).abs() <= 1e-14 * x.abs());
        }
        assert_eq!(s1.b, s2.b);
    }
}
