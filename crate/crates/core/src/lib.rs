//! Mixed finite elements (RT/BDM) for diffusion problems with piecewise-constant coefficients.
//!
//! ```
//! use rmix_core::{assemble_system, get_problem, solve_saddle, AssemblyOptions, ProblemParams, SpaceDescriptor};
//!
//! let spec = get_problem("interface_smooth", &ProblemParams { jump_ratio: 1e3, ..Default::default() })?;
//! let mesh = spec.mesh(16)?;
//! let coeff = spec.coefficient(&mesh)?;
//! let sys = assemble_system(&mesh, &coeff, SpaceDescriptor::rt(1), 1, &*spec.f, &*spec.g, &AssemblyOptions::default())?;
//! let sol = solve_saddle(&sys, 1e-10)?;
//! assert!(sol.residual_norm < 1e-8);
//! # Ok::<(), rmix_core::Error>(())
//! ```

pub mod analysis;
pub mod assembly;
pub mod coefficients;
pub mod elements;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod norms;
pub mod postprocess;
pub mod problems;
pub mod solver;
pub mod spaces;
pub mod sparse;

pub use error::{Error, Result};

pub use analysis::{AnalysisOptions, SpectralReport};
pub use assembly::{assemble_system, AssemblyOptions, SaddleSystem};
pub use coefficients::CoefficientField;
pub use elements::{Family, SpaceDescriptor};
pub use geometry::{Point, Vec2};
pub use mesh::{refine, EdgeClass, Mesh, RefinementSpec};
pub use postprocess::{stenberg_postprocess, PostField};
pub use problems::{get_problem, ProblemParams, ProblemSpec};
pub use solver::{solve_saddle, solve_saddle_with, SolveReport, SolverMethod};
pub use spaces::{DofMap, FieldVector};
