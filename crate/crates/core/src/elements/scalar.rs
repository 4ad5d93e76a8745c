use super::poly;
use crate::error::{Error, Result};
use crate::geometry::{Point, TriangleGeometry, Vec2};

pub const MAX_SCALAR_DEGREE: usize = 3;

pub fn scalar_dim(k: usize) -> usize {
    poly::monomial_count(k)
}

/// Hierarchical basis of `P_k` on the reference triangle: the graded
/// monomials in reference coordinates. Returns values and reference
/// gradients; the first function is the constant 1.
pub fn scalar_basis(k: usize, xi: &Point) -> Result<(Vec<f64>, Vec<Vec2>)> {
    if k > MAX_SCALAR_DEGREE {
        return Err(Error::UnsupportedDegree { space: "P".into(), degree: k });
    }
    Ok((poly::values(k, xi), poly::gradients(k, xi)))
}

/// Same basis with gradients mapped to physical coordinates.
pub fn scalar_basis_physical(k: usize, geom: &TriangleGeometry, xi: &Point) -> Result<(Vec<f64>, Vec<Vec2>)> {
    let (v, g) = scalar_basis(k, xi)?;
    let jit = geom.inverse_jacobian.transpose();
    Ok((v, g.into_iter().map(|g| jit * g).collect()))
}

/// Barycentric coordinates of a reference point, i.e. the nodal `P_1` basis.
pub fn barycentric(xi: &Point) -> [f64; 3] {
    [1.0 - xi.x - xi.y, xi.x, xi.y]
}
