//! Convergence-study driver for the mixed finite element library.

pub mod config;
pub mod study;
pub mod table;

pub use config::StudyConfig;
pub use study::{run_study, run_study_in_memory, StudyReport};
pub use table::{observed_rates, ConvergenceTable, RateBasis};
