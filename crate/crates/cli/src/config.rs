//! Study configuration, read from a flat TOML file.
//!
//! ```toml
//! problem = "smooth"          # smooth | interface_smooth | kellogg
//! jump_ratio = 1.0            # interface_smooth only
//! gamma = 0.5                 # kellogg only
//! space = "RT"                # RT | BDM
//! degree = 0
//! pot_degree = 0              # optional; defaults to the stable partner
//! refinement = "uniform"      # uniform | graded
//! base_cells = 2              # initial n x n structured mesh
//! levels = 4                  # meshes in the study
//! grading_passes = 8          # graded only: bisection passes on the base mesh
//! grading_factor = 0.5        # graded only: r_j = grading_factor^j
//! norms = ["flux_l2", "hdiv", "potential", "post"]
//! postprocess = true
//! analysis = false
//! solver = "schur"            # schur | direct
//! tol = 1e-10
//! output_dir = "out/smooth_rt0"
//! seed = 0
//! quadrature_depth = 6
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rmix_core::assembly::check_stable_pair;
use rmix_core::elements::SpaceDescriptor;
use rmix_core::problems::ProblemParams;
use rmix_core::solver::SolverMethod;
use serde::{Deserialize, Serialize};

/// Norm columns a study can report.
pub const NORMS: [&str; 6] = ["flux_l2", "flux_interp_l2", "hdiv", "div", "potential", "post"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Refinement {
    Uniform,
    Graded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Schur,
    Direct,
}

impl From<Solver> for SolverMethod {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Schur => SolverMethod::Schur,
            Solver::Direct => SolverMethod::Direct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub problem: String,
    pub jump_ratio: f64,
    pub gamma: f64,
    pub space: String,
    pub degree: usize,
    pub pot_degree: Option<usize>,
    pub refinement: Refinement,
    pub base_cells: usize,
    pub levels: usize,
    pub grading_passes: usize,
    pub grading_factor: f64,
    pub norms: Vec<String>,
    pub postprocess: bool,
    pub analysis: bool,
    pub solver: Solver,
    pub tol: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub quadrature_depth: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            problem: "smooth".into(),
            jump_ratio: 1.0,
            gamma: 0.5,
            space: "RT".into(),
            degree: 0,
            pot_degree: None,
            refinement: Refinement::Uniform,
            base_cells: 2,
            levels: 4,
            grading_passes: 8,
            grading_factor: 0.5,
            norms: vec!["flux_l2".into(), "hdiv".into(), "potential".into()],
            postprocess: false,
            analysis: false,
            solver: Solver::Schur,
            tol: 1e-10,
            output_dir: PathBuf::from("out"),
            seed: 0,
            quadrature_depth: 6,
        }
    }
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid study config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.output_dir.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    pub fn flux_space(&self) -> anyhow::Result<SpaceDescriptor> {
        match self.space.to_ascii_uppercase().as_str() {
            "RT" => Ok(SpaceDescriptor::rt(self.degree)),
            "BDM" => Ok(SpaceDescriptor::bdm(self.degree)),
            other => bail!("unknown flux space '{other}' (expected RT or BDM)"),
        }
    }

    /// Potential degree, by default the stable partner: `RT_k x D_k`, `BDM_k x D_{k-1}`.
    pub fn potential_degree(&self) -> anyhow::Result<usize> {
        let flux = self.flux_space()?;
        if let Some(k) = self.pot_degree {
            return Ok(k);
        }
        Ok(match flux.family {
            rmix_core::elements::Family::Bdm => flux.degree.saturating_sub(1),
            _ => flux.degree,
        })
    }

    pub fn problem_params(&self) -> ProblemParams {
        ProblemParams { jump_ratio: self.jump_ratio, gamma: self.gamma }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let flux = self.flux_space()?;
        check_stable_pair(flux, self.potential_degree()?)?;
        if self.levels == 0 {
            bail!("levels must be at least 1");
        }
        if self.levels < 2 && !self.norms.is_empty() {
            bail!("rates need at least 2 levels");
        }
        if self.base_cells == 0 {
            bail!("base_cells must be positive");
        }
        if let Some(n) = self.norms.iter().find(|n| !NORMS.contains(&n.as_str())) {
            bail!("unknown norm '{n}' (expected one of {NORMS:?})");
        }
        if self.norms.iter().any(|n| n == "post") && !self.postprocess {
            bail!("norm 'post' needs postprocess = true");
        }
        if self.refinement == Refinement::Graded && !(self.grading_factor > 0.0 && self.grading_factor < 1.0) {
            bail!("grading_factor must lie in (0, 1)");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let cfg = StudyConfig::from_toml(
            r#"
            problem = "kellogg"
            space = "BDM"
            degree = 1
            refinement = "graded"
            norms = ["flux_l2"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.refinement, Refinement::Graded);
        assert_eq!(cfg.potential_degree().unwrap(), 0);
        assert_eq!(cfg.levels, 4);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(StudyConfig::from_toml("space = \"RT\"\ndegree = 5").is_err());
        assert!(StudyConfig::from_toml("colour = 1").is_err());
        assert!(StudyConfig::from_toml("norms = [\"post\"]").is_err());
        assert!(StudyConfig::from_toml("levels = 1").is_err());
        assert!(StudyConfig::from_toml("space = \"XY\"").is_err());
        let err = StudyConfig::from_toml("degree = 0\npot_degree = 1").unwrap_err();
        assert!(matches!(err.downcast_ref(), Some(rmix_core::Error::UnstablePair { .. })), "{err:#}");
    }
}
