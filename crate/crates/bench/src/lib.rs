//! Shared fixtures for the benchmarks.

use rmix_core::{assemble_system, get_problem, AssemblyOptions, CoefficientField, Mesh, ProblemParams, ProblemSpec, SaddleSystem, SpaceDescriptor};

pub struct Fixture {
    pub spec: ProblemSpec,
    pub mesh: Mesh,
    pub coeff: CoefficientField,
}

/// Interface problem with jump ratio `ratio` on an `n x n` mesh.
pub fn interface(n: usize, ratio: f64) -> Fixture {
    let spec = get_problem("interface_smooth", &ProblemParams { jump_ratio: ratio, ..Default::default() }).expect("problem");
    let mesh = spec.mesh(n).expect("mesh");
    let coeff = spec.coefficient(&mesh).expect("coefficient");
    Fixture { spec, mesh, coeff }
}

impl Fixture {
    pub fn assemble(&self, flux: SpaceDescriptor, pot_degree: usize) -> SaddleSystem {
        assemble_system(&self.mesh, &self.coeff, flux, pot_degree, &*self.spec.f, &*self.spec.g, &AssemblyOptions::default()).expect("assembly")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_assembles() {
        let fx = interface(2, 10.0);
        let sys = fx.assemble(SpaceDescriptor::rt(0), 0);
        assert_eq!(sys.n_pot(), fx.mesh.n_triangles());
        assert_eq!(sys.n_flux(), fx.mesh.n_edges());
    }
}
