//! Saddle-point solvers: Schur complement CG (default) and sparse LU.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};

use crate::assembly::SaddleSystem;
use crate::error::{Error, Result};
use crate::spaces::FieldVector;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    Schur,
    Direct,
}

impl SolverMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            SolverMethod::Schur => "schur-pcg",
            SolverMethod::Direct => "direct-lu",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub sigma: FieldVector,
    pub u: FieldVector,
    /// Relative residual of the full block system.
    pub residual_norm: f64,
    pub method: SolverMethod,
    pub iterations: usize,
    /// Seconds.
    pub wall_time: f64,
}

pub fn solve_saddle(sys: &SaddleSystem, tol: f64) -> Result<SolveReport> {
    solve_saddle_with(sys, tol, SolverMethod::Schur)
}

pub fn solve_saddle_with(sys: &SaddleSystem, tol: f64, method: SolverMethod) -> Result<SolveReport> {
    if !(1e-14..=1e-6).contains(&tol) {
        return Err(Error::InvalidParams(format!("solver tolerance {tol:e} outside [1e-14, 1e-6]")));
    }
    // Factorizations run sequentially so results are reproducible.
    faer::set_global_parallelism(Par::Seq);
    let start = Instant::now();
    let (nf, np) = (sys.n_flux(), sys.n_pot());
    let rhs_norm = norm2(&sys.f_flux).hypot(norm2(&sys.f_pot));
    let (sigma, u, iterations) = if rhs_norm == 0.0 {
        (vec![0.0; nf], vec![0.0; np], 0)
    } else {
        match method {
            SolverMethod::Schur => schur(sys, tol)?,
            SolverMethod::Direct => direct(sys)?,
        }
    };
    let residual_norm = residual(sys, &sigma, &u);
    if !(residual_norm <= tol) {
        return Err(Error::NoConvergence(format!(
            "{}: relative residual {residual_norm:e} above tolerance {tol:e}",
            method.tag()
        )));
    }
    Ok(SolveReport {
        sigma: FieldVector::new(sys.flux_dofs.clone(), sigma)?,
        u: FieldVector::new(sys.pot_dofs.clone(), u)?,
        residual_norm,
        method,
        iterations,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// `||[A s - B^T u - F; B s - G]|| / ||[F; G]||`, or the absolute residual
/// for a zero right-hand side.
pub fn residual(sys: &SaddleSystem, sigma: &[f64], u: &[f64]) -> f64 {
    let r1 = sub(&sub(&sys.a.mul_vec(sigma), &sys.b.transpose_mul_vec(u)), &sys.f_flux);
    let r2 = sub(&sys.b.mul_vec(sigma), &sys.f_pot);
    let r = norm2(&r1).hypot(norm2(&r2));
    let rhs = norm2(&sys.f_flux).hypot(norm2(&sys.f_pot));
    if rhs > 0.0 {
        r / rhs
    } else {
        r
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

/// Sparse Cholesky factor of an SPD matrix.
pub struct SpdFactor {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl SpdFactor {
    pub fn new(m: &CsrMatrix) -> Result<Self> {
        let llt = m
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::SingularSystem(format!("Cholesky failed: {e:?}")))?;
        Ok(Self { llt, n: m.nrows })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(m.as_mut());
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }
}

/// `P = B diag(A)^-1 B^T`, used to precondition the Schur complement.
pub(crate) fn diagonal_schur(a: &CsrMatrix, b: &CsrMatrix) -> CsrMatrix {
    let d = a.diagonal();
    let bt = b.transpose();
    let mut t = crate::sparse::Triplets::new(b.nrows, b.nrows);
    for k in 0..bt.nrows {
        let row: Vec<(usize, f64)> = bt.row(k).collect();
        for &(i, vi) in &row {
            for &(j, vj) in &row {
                t.push(i, j, vi * vj / d[k]);
            }
        }
    }
    CsrMatrix::from_triplets(&t)
}

/// Preconditioned CG on `S u = G - B A^-1 F` with `S = B A^-1 B^T`.
fn schur(sys: &SaddleSystem, tol: f64) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let a = SpdFactor::new(&sys.a)?;
    let p = SpdFactor::new(&diagonal_schur(&sys.a, &sys.b))?;
    let apply_s = |x: &[f64]| sys.b.mul_vec(&a.solve(&sys.b.transpose_mul_vec(x)));
    let a_inv_f = a.solve(&sys.f_flux);
    let rhs = sub(&sys.f_pot, &sys.b.mul_vec(&a_inv_f));
    let np = sys.n_pot();
    let mut u = vec![0.0; np];
    let mut total = 0;
    let mut cg_tol = tol / 10.0;
    for _attempt in 0..4 {
        let (next, iters) = pcg(&apply_s, &|r: &[f64]| p.solve(r), &rhs, u.clone(), cg_tol, 10 * np + 100)?;
        u = next;
        total += iters;
        let sigma = a.solve(&add(&sys.f_flux, &sys.b.transpose_mul_vec(&u)));
        if residual(sys, &sigma, &u) <= tol {
            return Ok((sigma, u, total));
        }
        cg_tol /= 10.0;
    }
    let sigma = a.solve(&add(&sys.f_flux, &sys.b.transpose_mul_vec(&u)));
    Ok((sigma, u, total))
}

pub(crate) fn pcg(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    mut x: Vec<f64>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; b.len()], 0));
    }
    let mut r = sub(b, &apply(&x));
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        if norm2(&r) <= rel_tol * bnorm {
            return Ok((x, it));
        }
        let ap = apply(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = precond(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    if norm2(&r) <= rel_tol * bnorm {
        return Ok((x, max_iter));
    }
    Err(Error::NoConvergence(format!(
        "CG stopped after {max_iter} iterations at relative residual {:e}",
        norm2(&r) / bnorm
    )))
}

/// Sparse LU of `[[A, -B^T], [B, 0]]` with one step of iterative refinement.
fn direct(sys: &SaddleSystem) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let (nf, np) = (sys.n_flux(), sys.n_pot());
    let n = nf + np;
    let mut entries = sys.a.triplets();
    for t in sys.b.triplets() {
        entries.push(Triplet::new(nf + t.row, t.col, t.val));
        entries.push(Triplet::new(t.col, nf + t.row, -t.val));
    }
    let k = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries)
        .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
    let lu = k.sp_lu().map_err(|e| Error::SingularSystem(format!("LU failed: {e:?}")))?;
    let rhs: Vec<f64> = sys.f_flux.iter().chain(&sys.f_pot).copied().collect();
    let solve = |b: &[f64]| {
        let mut m = Mat::from_fn(n, 1, |i, _| b[i]);
        lu.solve_in_place(m.as_mut());
        (0..n).map(|i| m[(i, 0)]).collect::<Vec<f64>>()
    };
    let mut x = solve(&rhs);
    let kx = {
        let (s, u) = x.split_at(nf);
        let top = sub(&sys.a.mul_vec(s), &sys.b.transpose_mul_vec(u));
        let bottom = sys.b.mul_vec(s);
        top.into_iter().chain(bottom).collect::<Vec<f64>>()
    };
    let dx = solve(&sub(&rhs, &kx));
    x = add(&x, &dx);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("LU produced non-finite values".into()));
    }
    let u = x.split_off(nf);
    Ok((x, u, 1))
}
