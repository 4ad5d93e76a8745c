//! Spectral diagnostics: the discrete inf-sup constant, the continuity
//! constant of the divergence coupling, and the flux norm-equivalence constant.
//!
//! ```text
//! beta^2    = lambda_min(B M^-1 B^T, N)
//! C_con1^2  = lambda_max(B M^-1 B^T, N)
//! C_equiv^2 = lambda_max(G, M)
//! ```
//!
//! `M` is the `alpha^-1` flux mass matrix, `N` the Gram matrix of
//! `|||.|||_{alpha,h}` on `D_k` and `G = M + sum_F h_F / alpha_FH (.n, .n)_F`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::assembly::{assemble_system, check_stable_pair, AssemblyOptions};
use crate::coefficients::CoefficientField;
use crate::elements::{flux_element, scalar_basis_physical, SpaceDescriptor};
use crate::error::{Error, Result};
use crate::mesh::{EdgeClass, Mesh};
use crate::solver::{diagonal_schur, dot, pcg, SpdFactor};
use crate::spaces::{edge_rule, element_rule, DofMap};
use crate::sparse::{CsrMatrix, Triplets};

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    /// Eigenproblems up to this dimension are solved densely.
    pub dense_limit: usize,
    /// Relative tolerance of the iterative eigensolver.
    pub tol: f64,
    pub max_lanczos: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { dense_limit: 2000, tol: 1e-8, max_lanczos: 400 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub level: usize,
    pub alpha_ratio: f64,
    pub n_flux: usize,
    pub n_pot: usize,
    pub beta: f64,
    pub c_con1: f64,
    pub c_equiv: f64,
}

/// Gram matrix of `|||v|||^2 = sum_K alpha_K |v|_{1,K}^2 + sum_F alpha_FH / h_F ||[v]||_F^2`,
/// with `[v] = v` and `alpha_FH = alpha_K` on Dirichlet edges.
pub fn potential_gram(mesh: &Mesh, coeff: &CoefficientField, degree: usize) -> Result<CsrMatrix> {
    let dofs = DofMap::build(mesh, SpaceDescriptor::scalar(degree))?;
    let mut trip = Triplets::new(dofs.n_global, dofs.n_global);
    for t in 0..mesh.n_triangles() {
        let geom = mesh.geometry(t);
        let d = dofs.dofs(t);
        let alpha = coeff.alpha_by_triangle[t];
        for (xi, w) in element_rule(&geom, (2 * degree).max(1), &[], 0).iter() {
            let (_, g) = scalar_basis_physical(degree, &geom, &xi)?;
            for i in 0..d.len() {
                for j in 0..d.len() {
                    trip.push(d[i], d[j], w * geom.det * alpha * g[i].dot(&g[j]));
                }
            }
        }
    }
    for e in 0..mesh.n_edges() {
        let [a, b] = mesh.edges[e];
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        // alpha_FH / h_F times ds = h_F dt.
        let scale = coeff.alpha_harmonic_by_edge[e];
        let (t0, t1) = mesh.edge_triangles[e];
        let sides: Vec<(usize, f64)> = match (mesh.edge_class[e], t1) {
            (EdgeClass::Interior, Some(t1)) => vec![(t0, 1.0), (t1, -1.0)],
            _ => vec![(t0, 1.0)],
        };
        let rule = edge_rule(&pa, &pb, (2 * degree).max(1), &[], 0);
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let x = pa + (pb - pa) * s;
            let vals: Vec<(usize, f64, Vec<f64>)> = sides
                .iter()
                .map(|&(t, sign)| {
                    let g = mesh.geometry(t);
                    scalar_basis_physical(degree, &g, &g.inverse_map(&x)).map(|(v, _)| (t, sign, v))
                })
                .collect::<Result<_>>()?;
            for (ti, si, vi) in &vals {
                for (tj, sj, vj) in &vals {
                    let (di, dj) = (dofs.dofs(*ti), dofs.dofs(*tj));
                    for i in 0..di.len() {
                        for j in 0..dj.len() {
                            trip.push(di[i], dj[j], w * scale * si * sj * vi[i] * vj[j]);
                        }
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(&trip))
}

/// Gram matrix of `||tau||_{alpha,h}^2`, given the flux mass matrix `m`.
pub fn flux_norm_gram(mesh: &Mesh, coeff: &CoefficientField, flux: SpaceDescriptor, m: &CsrMatrix) -> Result<CsrMatrix> {
    let dofs = DofMap::build(mesh, flux)?;
    let el = flux_element(flux)?;
    let p = flux.poly_degree();
    let mut trip = Triplets::new(dofs.n_global, dofs.n_global);
    for (i, j, v) in m.triplets().iter().map(|t| (t.row, t.col, t.val)) {
        trip.push(i, j, v);
    }
    for e in 0..mesh.n_edges() {
        let t = mesh.edge_triangles[e].0;
        let geom = mesh.geometry(t);
        let [a, b] = mesh.edges[e];
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let n = mesh.edge_normal(e);
        let h = mesh.h_edge[e];
        let d = dofs.dofs(t);
        let sg = dofs.signs(t);
        let rule = edge_rule(&pa, &pb, 2 * p, &[], 0);
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let (vals, _) = el.eval(&geom, &geom.inverse_map(&(pa + (pb - pa) * s)));
            let vn: Vec<f64> = vals.iter().zip(sg).map(|(v, s)| s * v.dot(&n)).collect();
            for i in 0..d.len() {
                for j in 0..d.len() {
                    if vn[i] != 0.0 && vn[j] != 0.0 {
                        trip.push(d[i], d[j], w * h * h / coeff.alpha_harmonic_by_edge[e] * vn[i] * vn[j]);
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(&trip))
}

struct Operators {
    m: CsrMatrix,
    b: CsrMatrix,
    n: CsrMatrix,
}

fn operators(mesh: &Mesh, coeff: &CoefficientField, flux: SpaceDescriptor, pot_degree: usize) -> Result<Operators> {
    check_stable_pair(flux, pot_degree)?;
    let zero = |_: &crate::geometry::Point, _: usize| 0.0;
    let sys = assemble_system(mesh, coeff, flux, pot_degree, &zero, &zero, &AssemblyOptions::default())?;
    let n = potential_gram(mesh, coeff, pot_degree)?;
    Ok(Operators { m: sys.a, b: sys.b, n })
}

fn eig_err(what: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::EigenSolveFailure(format!("{what}: {e}"))
}

/// Eigenvalues of the dense pencil `(a, w)` with `w` SPD, ascending.
fn dense_pencil(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<Vec<f64>> {
    let l = w
        .clone()
        .cholesky()
        .ok_or_else(|| Error::EigenSolveFailure("Gram matrix is not positive definite".into()))?
        .l();
    let li = l
        .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))
        .ok_or_else(|| Error::EigenSolveFailure("singular Cholesky factor".into()))?;
    let c = &li * a * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    if ev.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenSolveFailure("non-finite eigenvalue".into()));
    }
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Largest eigenvalue of `op`, which must be self-adjoint in the inner
/// product `<x, y> = x^T W y`. Lanczos with full reorthogonalization.
fn lanczos_max(
    op: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    w: &CsrMatrix,
    n: usize,
    opts: &AnalysisOptions,
) -> Result<f64> {
    let wdot = |x: &[f64], y: &[f64]| dot(x, &w.mul_vec(y));
    let mut v: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() + 0.5).collect();
    let nv = wdot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let mut basis: Vec<Vec<f64>> = vec![v];
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let steps = opts.max_lanczos.min(n);
    let mut last = f64::NAN;
    for j in 0..steps {
        let mut r = op(&basis[j])?;
        alphas.push(wdot(&basis[j], &r));
        for _pass in 0..2 {
            for q in &basis {
                let c = wdot(q, &r);
                r.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = wdot(&r, &r).sqrt();
        let m = alphas.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (k, &theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty tridiagonal");
        let resid = beta * eig.eigenvectors[(m - 1, k)].abs();
        if !theta.is_finite() {
            return Err(Error::EigenSolveFailure("non-finite Ritz value".into()));
        }
        if resid <= opts.tol * theta.abs() || beta <= 1e-14 * theta.abs() || j + 1 == n {
            return Ok(theta);
        }
        last = theta;
        betas.push(beta);
        basis.push(r.iter().map(|x| x / beta).collect());
    }
    Err(Error::EigenSolveFailure(format!("Lanczos did not converge in {steps} steps (last Ritz value {last:e})")))
}

fn dense_schur(ops: &Operators, mf: &SpdFactor) -> DMatrix<f64> {
    let np = ops.b.nrows;
    let mut s = DMatrix::zeros(np, np);
    for j in 0..np {
        let mut col = vec![0.0; ops.b.ncols];
        for (c, v) in ops.b.row(j) {
            col[c] = v;
        }
        let y = ops.b.mul_vec(&mf.solve(&col));
        for i in 0..np {
            s[(i, j)] = y[i];
        }
    }
    (&s + s.transpose()) * 0.5
}

/// `(beta, C_con1)`: square roots of the extreme eigenvalues of `(B M^-1 B^T, N)`.
pub fn infsup_bounds(
    mesh: &Mesh,
    coeff: &CoefficientField,
    flux: SpaceDescriptor,
    pot_degree: usize,
    opts: &AnalysisOptions,
) -> Result<(f64, f64)> {
    let ops = operators(mesh, coeff, flux, pot_degree)?;
    let mf = SpdFactor::new(&ops.m).map_err(eig_err("flux mass"))?;
    let np = ops.b.nrows;
    let (lo, hi) = if np <= opts.dense_limit {
        let ev = dense_pencil(&dense_schur(&ops, &mf), &ops.n.to_dense())?;
        (ev[0], ev[np - 1])
    } else {
        let nf = SpdFactor::new(&ops.n).map_err(eig_err("potential Gram"))?;
        let pre = SpdFactor::new(&diagonal_schur(&ops.m, &ops.b)).map_err(eig_err("Schur preconditioner"))?;
        let apply_s = |x: &[f64]| ops.b.mul_vec(&mf.solve(&ops.b.transpose_mul_vec(x)));
        let hi = lanczos_max(&|x| Ok(nf.solve(&apply_s(x))), &ops.n, np, opts)?;
        let inv = |x: &[f64]| -> Result<Vec<f64>> {
            let rhs = ops.n.mul_vec(x);
            pcg(&apply_s, &|r: &[f64]| pre.solve(r), &rhs, vec![0.0; np], 1e-13, 20 * np + 200)
                .map(|(y, _)| y)
                .map_err(eig_err("shift-invert solve"))
        };
        let lo = 1.0 / lanczos_max(&inv, &ops.n, np, opts)?;
        (lo, hi)
    };
    if lo <= 0.0 {
        return Err(Error::EigenSolveFailure(format!("non-positive smallest eigenvalue {lo:e}")));
    }
    Ok((lo.sqrt(), hi.sqrt()))
}

pub fn infsup_constant(mesh: &Mesh, coeff: &CoefficientField, flux: SpaceDescriptor, pot_degree: usize) -> Result<f64> {
    infsup_bounds(mesh, coeff, flux, pot_degree, &AnalysisOptions::default()).map(|(b, _)| b)
}

/// Inf-sup constant from the flux side: the smallest nonzero eigenvalue of
/// `(B^T N^-1 B, M)`, i.e. the sup over potentials restricted to the
/// `M`-orthogonal complement of the divergence-free fluxes. Dense only.
pub fn dual_infsup_constant(mesh: &Mesh, coeff: &CoefficientField, flux: SpaceDescriptor, pot_degree: usize) -> Result<f64> {
    let ops = operators(mesh, coeff, flux, pot_degree)?;
    let nfac = SpdFactor::new(&ops.n).map_err(eig_err("potential Gram"))?;
    let (np, nflux) = (ops.b.nrows, ops.b.ncols);
    let bd = ops.b.to_dense();
    let mut ninv_b = DMatrix::zeros(np, nflux);
    for j in 0..nflux {
        let y = nfac.solve(&bd.column(j).iter().copied().collect::<Vec<_>>());
        for i in 0..np {
            ninv_b[(i, j)] = y[i];
        }
    }
    let k = bd.transpose() * ninv_b;
    let k = (&k + k.transpose()) * 0.5;
    let ev = dense_pencil(&k, &ops.m.to_dense())?;
    // rank(B) = n_pot, so the top n_pot eigenvalues are the nonzero ones.
    let lo = ev[nflux - np];
    if lo <= 0.0 {
        return Err(Error::EigenSolveFailure(format!("non-positive eigenvalue {lo:e}")));
    }
    Ok(lo.sqrt())
}

/// Square root of the largest eigenvalue of `(G, M)`.
pub fn norm_equivalence_with(mesh: &Mesh, coeff: &CoefficientField, flux: SpaceDescriptor, opts: &AnalysisOptions) -> Result<f64> {
    flux.validate()?;
    if !flux.is_flux() {
        return Err(Error::UnsupportedDegree { space: flux.to_string(), degree: flux.degree });
    }
    let pot = match flux.family {
        crate::elements::Family::Bdm => flux.degree - 1,
        _ => flux.degree,
    };
    let ops = operators(mesh, coeff, flux, pot)?;
    let g = flux_norm_gram(mesh, coeff, flux, &ops.m)?;
    let n = ops.m.nrows;
    let hi = if n <= opts.dense_limit {
        *dense_pencil(&g.to_dense(), &ops.m.to_dense())?.last().expect("nonempty")
    } else {
        let mf = SpdFactor::new(&ops.m).map_err(eig_err("flux mass"))?;
        lanczos_max(&|x| Ok(mf.solve(&g.mul_vec(x))), &ops.m, n, opts)?
    };
    Ok(hi.sqrt())
}

pub fn norm_equivalence_constant(mesh: &Mesh, coeff: &CoefficientField, flux: SpaceDescriptor) -> Result<f64> {
    norm_equivalence_with(mesh, coeff, flux, &AnalysisOptions::default())
}

pub fn spectral_report(
    mesh: &Mesh,
    coeff: &CoefficientField,
    flux: SpaceDescriptor,
    pot_degree: usize,
    level: usize,
    opts: &AnalysisOptions,
) -> Result<SpectralReport> {
    let (beta, c_con1) = infsup_bounds(mesh, coeff, flux, pot_degree, opts)?;
    let c_equiv = norm_equivalence_with(mesh, coeff, flux, opts)?;
    Ok(SpectralReport {
        level,
        alpha_ratio: coeff.alpha_ratio(),
        n_flux: DofMap::build(mesh, flux)?.n_global,
        n_pot: DofMap::build(mesh, SpaceDescriptor::scalar(pot_degree))?.n_global,
        beta,
        c_con1,
        c_equiv,
    })
}

/// CSV with header `level,n_flux,n_pot,alpha_ratio,beta,C_equiv`.
pub fn spectral_csv(reports: &[SpectralReport]) -> String {
    let mut out = String::from("level,n_flux,n_pot,alpha_ratio,beta,C_equiv\n");
    for r in reports {
        let _ = writeln!(out, "{},{},{},{:e},{:.12e},{:.12e}", r.level, r.n_flux, r.n_pot, r.alpha_ratio, r.beta, r.c_equiv);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{refine, RefinementSpec};

    fn square(levels: usize) -> Mesh {
        refine(&Mesh::unit_square(), &RefinementSpec::uniform(levels)).unwrap()
    }

    #[test]
    fn potential_gram_is_spd() {
        let mesh = square(1);
        let c = CoefficientField::uniform(&mesh, 2.0).unwrap();
        for k in 0..=2 {
            let n = potential_gram(&mesh, &c, k).unwrap();
            assert!(n.symmetry_defect() < 1e-12);
            assert!(n.to_dense().cholesky().is_some());
        }
    }

    #[test]
    fn ordering_and_scaling() {
        let mesh = square(2);
        let c = CoefficientField::uniform(&mesh, 1.0).unwrap();
        let opts = AnalysisOptions::default();
        let (beta, con) = infsup_bounds(&mesh, &c, SpaceDescriptor::rt(0), 0, &opts).unwrap();
        assert!(beta > 0.0 && beta <= con);
        let c7 = c.scaled(&mesh, 7.0).unwrap();
        let (beta7, _) = infsup_bounds(&mesh, &c7, SpaceDescriptor::rt(0), 0, &opts).unwrap();
        assert!(((beta7 - beta) / beta).abs() < 1e-8);
        assert!(norm_equivalence_constant(&mesh, &c, SpaceDescriptor::rt(0)).unwrap() >= 1.0);
    }

    #[test]
    fn dual_matches_primal() {
        let mesh = square(1);
        let c = CoefficientField::uniform(&mesh, 1.0).unwrap();
        for (flux, k) in [(SpaceDescriptor::rt(0), 0), (SpaceDescriptor::bdm(1), 0), (SpaceDescriptor::rt(1), 1)] {
            let primal = infsup_constant(&mesh, &c, flux, k).unwrap();
            let dual = dual_infsup_constant(&mesh, &c, flux, k).unwrap();
            assert!(((primal - dual) / primal).abs() < 1e-6, "{flux}: {primal} vs {dual}");
        }
    }

    #[test]
    fn iterative_agrees_with_dense() {
        let mesh = square(2);
        let c = CoefficientField::uniform(&mesh, 1.0).unwrap();
        let dense = AnalysisOptions::default();
        let iter = AnalysisOptions { dense_limit: 0, ..Default::default() };
        let (b0, c0) = infsup_bounds(&mesh, &c, SpaceDescriptor::rt(0), 0, &dense).unwrap();
        let (b1, c1) = infsup_bounds(&mesh, &c, SpaceDescriptor::rt(0), 0, &iter).unwrap();
        assert!(((b0 - b1) / b0).abs() < 1e-6 && ((c0 - c1) / c0).abs() < 1e-6);
        let e0 = norm_equivalence_with(&mesh, &c, SpaceDescriptor::rt(0), &dense).unwrap();
        let e1 = norm_equivalence_with(&mesh, &c, SpaceDescriptor::rt(0), &iter).unwrap();
        assert!(((e0 - e1) / e0).abs() < 1e-6);
    }

    #[test]
    fn csv_header() {
        assert!(spectral_csv(&[]).starts_with("level,n_flux,n_pot,alpha_ratio,beta,C_equiv"));
    }
}
