//! Reference elements: discontinuous scalar `P_k`, `RT_k` and `BDM_k`, plus
//! quadrature.

mod flux;
pub mod poly;
pub mod quadrature;
mod scalar;

pub use flux::{dof_functionals, flux_basis, flux_element, FluxElement, MomentOptions};
pub use quadrature::{quadrature, QuadratureRule};
pub use scalar::{barycentric, scalar_basis, scalar_basis_physical, scalar_dim, MAX_SCALAR_DEGREE};

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Rt,
    Bdm,
    DiscontinuousScalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceDescriptor {
    pub family: Family,
    pub degree: usize,
}

impl SpaceDescriptor {
    pub fn rt(degree: usize) -> Self {
        Self { family: Family::Rt, degree }
    }

    pub fn bdm(degree: usize) -> Self {
        Self { family: Family::Bdm, degree }
    }

    pub fn scalar(degree: usize) -> Self {
        Self { family: Family::DiscontinuousScalar, degree }
    }

    pub fn is_flux(&self) -> bool {
        self.family != Family::DiscontinuousScalar
    }

    /// Local dimension per triangle.
    pub fn local_dim(&self) -> usize {
        let k = self.degree;
        match self.family {
            Family::Rt => (k + 1) * (k + 3),
            Family::Bdm => (k + 1) * (k + 2),
            Family::DiscontinuousScalar => (k + 1) * (k + 2) / 2,
        }
    }

    /// Highest total degree of the local polynomials.
    pub fn poly_degree(&self) -> usize {
        match self.family {
            Family::Rt => self.degree + 1,
            _ => self.degree,
        }
    }

    /// Normal-moment DOFs per edge (flux spaces only).
    pub fn edge_dofs(&self) -> usize {
        match self.family {
            Family::DiscontinuousScalar => 0,
            _ => self.degree + 1,
        }
    }

    pub fn interior_dofs(&self) -> usize {
        match self.family {
            Family::DiscontinuousScalar => self.local_dim(),
            _ => self.local_dim() - 3 * self.edge_dofs(),
        }
    }

    /// Degree of the divergence space, i.e. the matching potential degree.
    pub fn divergence_degree(&self) -> Option<usize> {
        match self.family {
            Family::Rt => Some(self.degree),
            Family::Bdm => Some(self.degree - 1),
            Family::DiscontinuousScalar => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.family {
            Family::Rt => self.degree <= 1,
            Family::Bdm => (1..=2).contains(&self.degree),
            Family::DiscontinuousScalar => self.degree <= MAX_SCALAR_DEGREE,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnsupportedDegree { space: self.to_string(), degree: self.degree })
        }
    }
}

impl fmt::Display for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Rt => write!(f, "RT{}", self.degree),
            Family::Bdm => write!(f, "BDM{}", self.degree),
            Family::DiscontinuousScalar => write!(f, "D{}", self.degree),
        }
    }
}
