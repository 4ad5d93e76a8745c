//! Piecewise-constant diffusion coefficients.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mesh::{EdgeClass, Mesh};

pub fn harmonic_average(a_plus: f64, a_minus: f64) -> Result<f64> {
    for a in [a_plus, a_minus] {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::NonPositiveCoefficient(a));
        }
    }
    Ok(a_plus * a_minus / (a_plus + a_minus))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub alpha_by_subdomain: BTreeMap<usize, f64>,
    pub alpha_by_triangle: Vec<f64>,
    /// Harmonic average on interior edges, the incident value on Dirichlet edges.
    pub alpha_harmonic_by_edge: Vec<f64>,
}

impl CoefficientField {
    pub fn build(mesh: &Mesh, alpha_by_subdomain: &BTreeMap<usize, f64>) -> Result<Self> {
        for &a in alpha_by_subdomain.values() {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::NonPositiveCoefficient(a));
            }
        }
        let alpha_by_triangle = mesh
            .subdomain
            .iter()
            .map(|s| alpha_by_subdomain.get(s).copied().ok_or(Error::MissingSubdomain(*s)))
            .collect::<Result<Vec<_>>>()?;
        let mut harmonic = Vec::with_capacity(mesh.n_edges());
        for (e, &(t0, t1)) in mesh.edge_triangles.iter().enumerate() {
            let value = match (mesh.edge_class[e], t1) {
                (EdgeClass::Interior, Some(t1)) => harmonic_average(alpha_by_triangle[t0], alpha_by_triangle[t1])?,
                _ => alpha_by_triangle[t0],
            };
            harmonic.push(value);
        }
        Ok(Self {
            alpha_by_subdomain: alpha_by_subdomain.clone(),
            alpha_harmonic_by_edge: harmonic,
            alpha_by_triangle,
        })
    }

    /// Same `alpha` on every subdomain present in `mesh`.
    pub fn uniform(mesh: &Mesh, alpha: f64) -> Result<Self> {
        let map = (0..mesh.n_subdomains()).map(|s| (s, alpha)).collect();
        Self::build(mesh, &map)
    }

    /// Every value multiplied by `c`.
    pub fn scaled(&self, mesh: &Mesh, c: f64) -> Result<Self> {
        let map = self.alpha_by_subdomain.iter().map(|(&k, &v)| (k, c * v)).collect();
        Self::build(mesh, &map)
    }

    pub fn alpha_ratio(&self) -> f64 {
        let max = self.alpha_by_subdomain.values().copied().fold(0.0, f64::max);
        let min = self.alpha_by_subdomain.values().copied().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Largest relative defect of `1/a_FH = 1/a+ + 1/a-` over interior edges,
    /// and whether `min/2 <= a_FH <= min` holds on every edge.
    pub fn check_identities(&self, mesh: &Mesh) -> (f64, bool) {
        let mut defect: f64 = 0.0;
        let mut bounds = true;
        for (e, &(t0, t1)) in mesh.edge_triangles.iter().enumerate() {
            let h = self.alpha_harmonic_by_edge[e];
            if let Some(t1) = t1 {
                let (a, b) = (self.alpha_by_triangle[t0], self.alpha_by_triangle[t1]);
                let lhs = 1.0 / h;
                let rhs = 1.0 / a + 1.0 / b;
                defect = defect.max((lhs - rhs).abs() / rhs);
                let m = a.min(b);
                bounds &= 0.5 * m * (1.0 - 1e-15) <= h && h <= m * (1.0 + 1e-15);
            }
        }
        (defect, bounds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn harmonic_examples() {
        assert_eq!(harmonic_average(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(harmonic_average(2.0, 2.0).unwrap(), 1.0);
        let v = harmonic_average(1e6, 1.0).unwrap();
        assert!((v - 1e6 / (1e6 + 1.0)).abs() < 1e-15);
        assert!(matches!(harmonic_average(0.0, 1.0), Err(Error::NonPositiveCoefficient(_))));
        assert!(matches!(harmonic_average(1.0, -2.0), Err(Error::NonPositiveCoefficient(_))));
    }

    #[test]
    fn single_subdomain_values() {
        let mesh = Mesh::unit_square();
        let c = CoefficientField::uniform(&mesh, 3.0).unwrap();
        for e in 0..mesh.n_edges() {
            let expect = if mesh.edge_class[e] == EdgeClass::Interior { 1.5 } else { 3.0 };
            assert_eq!(c.alpha_harmonic_by_edge[e], expect);
        }
    }

    #[test]
    fn checkerboard_interface_value() {
        let mesh = Mesh::rectangle((-1.0, 1.0), (0.0, 1.0), 2, 1, |p| usize::from(p.x > 0.0)).unwrap();
        let r = 1e3;
        let c = CoefficientField::build(&mesh, &[(0, 1.0), (1, r)].into_iter().collect()).unwrap();
        let e = (0..mesh.n_edges()).find(|&e| mesh.is_interface(e)).unwrap();
        assert!((c.alpha_harmonic_by_edge[e] - r / (1.0 + r)).abs() < 1e-15);
    }

    #[test]
    fn missing_or_bad_entries() {
        let mesh = Mesh::rectangle((-1.0, 1.0), (0.0, 1.0), 2, 1, |p| usize::from(p.x > 0.0)).unwrap();
        let only0 = [(0, 1.0)].into_iter().collect();
        assert_eq!(CoefficientField::build(&mesh, &only0).unwrap_err(), Error::MissingSubdomain(1));
        let bad = [(0, 1.0), (1, 0.0)].into_iter().collect();
        assert!(matches!(CoefficientField::build(&mesh, &bad), Err(Error::NonPositiveCoefficient(_))));
    }

    proptest! {
        #[test]
        fn harmonic_bounds_and_reciprocal_identity(a in 1e-6f64..1e6, b in 1e-6f64..1e6) {
            let h = harmonic_average(a, b).unwrap();
            prop_assert_eq!(h, harmonic_average(b, a).unwrap());
            let m = a.min(b);
            prop_assert!(0.5 * m * (1.0 - 1e-15) <= h && h <= m * (1.0 + 1e-15));
            let rhs = 1.0 / a + 1.0 / b;
            prop_assert!(((1.0 / h - rhs) / rhs).abs() < 1e-14);
        }
    }
}
