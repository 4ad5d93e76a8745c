//! Benchmark catalog with exact solutions.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SMatrix, SVector};

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::geometry::{Point, Vec2};
use crate::mesh::Mesh;

pub type ScalarField = Arc<dyn Fn(&Point, usize) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&Point, usize) -> Vec2 + Send + Sync>;
pub type Layout = Arc<dyn Fn(&Point) -> usize + Send + Sync>;

/// Element regularity `s_K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularity {
    Global(f64),
    /// `low` on triangles touching a singular point, `high` elsewhere.
    Singular { low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub jump_ratio: f64,
    pub gamma: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self { jump_ratio: 1.0, gamma: 0.5 }
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    /// `(x0, x1), (y0, y1)`.
    pub domain: ((f64, f64), (f64, f64)),
    pub layout: Layout,
    pub alpha_by_subdomain: BTreeMap<usize, f64>,
    pub f: ScalarField,
    pub g: ScalarField,
    pub exact_u: Option<ScalarField>,
    pub exact_grad_u: Option<VectorField>,
    pub exact_sigma: Option<VectorField>,
    pub singular_points: Vec<Point>,
    pub regularity: Regularity,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("alpha_by_subdomain", &self.alpha_by_subdomain)
            .field("singular_points", &self.singular_points)
            .field("regularity", &self.regularity)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Structured mesh of the domain with `n x n` cells.
    pub fn mesh(&self, n: usize) -> Result<Mesh> {
        let layout = self.layout.clone();
        Mesh::rectangle(self.domain.0, self.domain.1, n, n, move |p| layout(p))
    }

    pub fn coefficient(&self, mesh: &Mesh) -> Result<CoefficientField> {
        CoefficientField::build(mesh, &self.alpha_by_subdomain)
    }

    pub fn alpha(&self, subdomain: usize) -> f64 {
        self.alpha_by_subdomain[&subdomain]
    }

    pub fn s_k(&self, mesh: &Mesh, t: usize) -> f64 {
        match self.regularity {
            Regularity::Global(s) => s,
            Regularity::Singular { low, high } => {
                let g = mesh.geometry(t);
                if self.singular_points.iter().any(|p| g.contains(p)) {
                    low
                } else {
                    high
                }
            }
        }
    }
}

pub fn get_problem(name: &str, params: &ProblemParams) -> Result<ProblemSpec> {
    match name {
        "smooth" => Ok(smooth()),
        "interface_smooth" => interface_smooth(params.jump_ratio),
        "kellogg" => kellogg(params.gamma),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

fn smooth() -> ProblemSpec {
    let u = |p: &Point| (PI * p.x).sin() * (PI * p.y).sin();
    let grad = |p: &Point| PI * Vec2::new((PI * p.x).cos() * (PI * p.y).sin(), (PI * p.x).sin() * (PI * p.y).cos());
    ProblemSpec {
        name: "smooth".into(),
        domain: ((0.0, 1.0), (0.0, 1.0)),
        layout: Arc::new(|_| 0),
        alpha_by_subdomain: [(0, 1.0)].into_iter().collect(),
        f: Arc::new(move |p, _| 2.0 * PI * PI * u(p)),
        g: Arc::new(move |p, _| u(p)),
        exact_u: Some(Arc::new(move |p, _| u(p))),
        exact_grad_u: Some(Arc::new(move |p, _| grad(p))),
        exact_sigma: Some(Arc::new(move |p, _| -grad(p))),
        singular_points: Vec::new(),
        regularity: Regularity::Global(f64::INFINITY),
    }
}

/// `alpha = R` for `x < 0` (subdomain 0) and `1` for `x > 0` (subdomain 1).
fn interface_smooth(r: f64) -> Result<ProblemSpec> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParams(format!("jump ratio must be positive, got {r}")));
    }
    let alpha = [r, 1.0];
    let s = |p: &Point| (PI * p.x).sin() * (PI * p.y).sin();
    let flux = |p: &Point| -PI * Vec2::new((PI * p.x).cos() * (PI * p.y).sin(), (PI * p.x).sin() * (PI * p.y).cos());
    Ok(ProblemSpec {
        name: "interface_smooth".into(),
        domain: ((-1.0, 1.0), (-1.0, 1.0)),
        layout: Arc::new(|p| usize::from(p.x > 0.0)),
        alpha_by_subdomain: [(0, r), (1, 1.0)].into_iter().collect(),
        f: Arc::new(move |p, _| 2.0 * PI * PI * s(p)),
        g: Arc::new(move |p, sub| s(p) / alpha[sub]),
        exact_u: Some(Arc::new(move |p, sub| s(p) / alpha[sub])),
        exact_grad_u: Some(Arc::new(move |p, sub| -flux(p) / alpha[sub])),
        exact_sigma: Some(Arc::new(move |p, _| flux(p))),
        singular_points: Vec::new(),
        regularity: Regularity::Global(f64::INFINITY),
    })
}

/// Parameters of the checkerboard singular solution `u = r^gamma mu(theta)`.
/// On quadrant `s` (counterclockwise from the positive x-axis),
/// `mu = a[s] cos(gamma phi) + b[s] sin(gamma phi)` with `phi = theta - s pi/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KelloggConstants {
    pub gamma: f64,
    pub ratio: f64,
    pub a: [f64; 4],
    pub b: [f64; 4],
}

impl KelloggConstants {
    /// Coefficients on quadrants 0..4: `R, 1, R, 1`.
    pub fn alpha(&self) -> [f64; 4] {
        [self.ratio, 1.0, self.ratio, 1.0]
    }

    /// Normalized transmission residual of the parameters.
    pub fn residual(&self) -> f64 {
        let m = transmission_matrix(self.ratio, self.gamma);
        let x = SVector::<f64, 8>::from_fn(|i, _| if i % 2 == 0 { self.a[i / 2] } else { self.b[i / 2] });
        (m * x).norm() / x.norm()
    }

    /// Local angle in quadrant `s`, in `[0, pi/2]` up to rounding.
    fn local_angle(p: &Point, s: usize) -> f64 {
        let (x, y) = match s % 4 {
            0 => (p.x, p.y),
            1 => (p.y, -p.x),
            2 => (-p.x, -p.y),
            _ => (-p.y, p.x),
        };
        y.atan2(x)
    }

    pub fn u(&self, p: &Point, s: usize) -> f64 {
        let r = p.coords.norm();
        if r == 0.0 {
            return 0.0;
        }
        let phi = Self::local_angle(p, s);
        r.powf(self.gamma) * (self.a[s] * (self.gamma * phi).cos() + self.b[s] * (self.gamma * phi).sin())
    }

    pub fn grad_u(&self, p: &Point, s: usize) -> Vec2 {
        let r = p.coords.norm();
        if r == 0.0 {
            return Vec2::zeros();
        }
        let g = self.gamma;
        let phi = Self::local_angle(p, s);
        let mu = self.a[s] * (g * phi).cos() + self.b[s] * (g * phi).sin();
        let dmu = g * (-self.a[s] * (g * phi).sin() + self.b[s] * (g * phi).cos());
        let theta = phi + s as f64 * PI / 2.0;
        let er = Vec2::new(theta.cos(), theta.sin());
        let et = Vec2::new(-theta.sin(), theta.cos());
        r.powf(g - 1.0) * (g * mu * er + dmu * et)
    }
}

/// Rows: continuity of `u` and of the conormal flux across the ray between
/// quadrant `i` and `i + 1`, flux rows divided by the largest coefficient.
fn transmission_matrix(ratio: f64, gamma: f64) -> SMatrix<f64, 8, 8> {
    let (s, c) = (gamma * PI / 2.0).sin_cos();
    let alpha = [ratio, 1.0, ratio, 1.0];
    let scale = ratio.max(1.0);
    let mut m = SMatrix::<f64, 8, 8>::zeros();
    for i in 0..4 {
        let j = (i + 1) % 4;
        m[(2 * i, 2 * i)] = c;
        m[(2 * i, 2 * i + 1)] = s;
        m[(2 * i, 2 * j)] -= 1.0;
        m[(2 * i + 1, 2 * i)] = -alpha[i] * s / scale;
        m[(2 * i + 1, 2 * i + 1)] = alpha[i] * c / scale;
        m[(2 * i + 1, 2 * j + 1)] -= alpha[j] / scale;
    }
    m
}

/// Finds the smallest ratio `R > 1` for which the transmission system has a
/// nontrivial solution with exponent `gamma`, and that solution.
pub fn kellogg_constants(gamma: f64) -> Result<KelloggConstants> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParams(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let det = |log_r: f64| transmission_matrix(log_r.exp(), gamma).determinant();
    let (lo_bound, hi_bound) = ((1.0 + 1e-9_f64).ln(), 1e12_f64.ln());
    let steps = 6000;
    let mut bracket = None;
    let mut prev = (lo_bound, det(lo_bound));
    for i in 1..=steps {
        let x = lo_bound + (hi_bound - lo_bound) * i as f64 / steps as f64;
        let d = det(x);
        if d == 0.0 || d.signum() != prev.1.signum() {
            bracket = Some((prev.0, x, prev.1));
            break;
        }
        prev = (x, d);
    }
    let (mut lo, mut hi, dlo) = bracket.ok_or_else(|| Error::RootFindFailure(format!("no sign change for gamma {gamma}")))?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let d = det(mid);
        if d == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if d.signum() == dlo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let ratio = (0.5 * (lo + hi)).exp();

    let m = DMatrix::from_iterator(8, 8, transmission_matrix(ratio, gamma).iter().copied());
    let svd = m.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::RootFindFailure("SVD failed".into()))?;
    let (k, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let mut v: Vec<f64> = v_t.row(k).iter().copied().collect();
    // Fix scale and sign: largest amplitude 1, a[0] >= 0.
    let scale = (0..4).map(|s| v[2 * s].hypot(v[2 * s + 1])).fold(0.0, f64::max);
    let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
    v.iter_mut().for_each(|x| *x *= sign / scale);
    let consts = KelloggConstants {
        gamma,
        ratio,
        a: std::array::from_fn(|s| v[2 * s]),
        b: std::array::from_fn(|s| v[2 * s + 1]),
    };
    let res = consts.residual();
    if !(res < 1e-10) {
        return Err(Error::RootFindFailure(format!("transmission residual {res:e} for gamma {gamma}")));
    }
    Ok(consts)
}

fn quadrant(p: &Point) -> usize {
    match (p.x > 0.0, p.y > 0.0) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

fn kellogg(gamma: f64) -> Result<ProblemSpec> {
    let k = kellogg_constants(gamma)?;
    let alpha = k.alpha();
    Ok(ProblemSpec {
        name: "kellogg".into(),
        domain: ((-1.0, 1.0), (-1.0, 1.0)),
        layout: Arc::new(quadrant),
        alpha_by_subdomain: (0..4).map(|s| (s, alpha[s])).collect(),
        f: Arc::new(|_, _| 0.0),
        g: Arc::new(move |p, s| k.u(p, s)),
        exact_u: Some(Arc::new(move |p, s| k.u(p, s))),
        exact_grad_u: Some(Arc::new(move |p, s| k.grad_u(p, s))),
        exact_sigma: Some(Arc::new(move |p, s| -alpha[s] * k.grad_u(p, s))),
        singular_points: vec![Point::origin()],
        regularity: Regularity::Singular { low: gamma, high: f64::INFINITY },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_and_invalid() {
        assert!(matches!(get_problem("nope", &ProblemParams::default()), Err(Error::UnknownProblem(_))));
        let bad = ProblemParams { gamma: 1.5, ..ProblemParams::default() };
        assert!(matches!(get_problem("kellogg", &bad), Err(Error::InvalidParams(_))));
        let bad = ProblemParams { jump_ratio: -1.0, ..ProblemParams::default() };
        assert!(matches!(get_problem("interface_smooth", &bad), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn kellogg_continuity_across_axes() {
        let k = kellogg_constants(0.5).unwrap();
        assert!(k.residual() < 1e-10);
        for (p, s, t) in [
            (Point::new(0.0, 0.4), 0, 1),
            (Point::new(-0.7, 0.0), 1, 2),
            (Point::new(0.0, -0.2), 2, 3),
            (Point::new(0.9, 0.0), 3, 0),
        ] {
            assert!((k.u(&p, s) - k.u(&p, t)).abs() < 1e-10);
            let alpha = k.alpha();
            let n = if p.x == 0.0 { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) };
            let f0 = alpha[s] * k.grad_u(&p, s).dot(&n);
            let f1 = alpha[t] * k.grad_u(&p, t).dot(&n);
            assert!((f0 - f1).abs() < 1e-10 * alpha[s].max(alpha[t]), "{f0} {f1}");
        }
    }

    #[test]
    fn regularity_policy() {
        let p = get_problem("kellogg", &ProblemParams::default()).unwrap();
        let mesh = p.mesh(4).unwrap();
        let low = (0..mesh.n_triangles()).filter(|&t| p.s_k(&mesh, t) == 0.5).count();
        assert_eq!(low, mesh.triangles_touching(&Point::origin()).len());
        assert!(low > 0);
    }
}
