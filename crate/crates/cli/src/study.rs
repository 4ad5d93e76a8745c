//! Convergence study driver: one solve per mesh level, norms, rates, reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmix_core::analysis::{spectral_csv, spectral_report, AnalysisOptions, SpectralReport};
use rmix_core::assembly::{assemble_system, AssemblyOptions};
use rmix_core::coefficients::CoefficientField;
use rmix_core::elements::MomentOptions;
use rmix_core::geometry::Point;
use rmix_core::mesh::{refine, Mesh, RefinementSpec};
use rmix_core::norms::{
    discrete_flux_norm_alpha_h, discrete_flux_weighted_l2, element_errors, element_errors_csv, equilibration, flux_error_weighted_l2,
    potential_error_dg, ElementError, NormOptions,
};
use rmix_core::postprocess::stenberg_postprocess;
use rmix_core::problems::{get_problem, ProblemSpec};
use rmix_core::solver::solve_saddle_with;
use rmix_core::spaces::{interpolate_flux, l2_project, FieldVector, QuadOptions};
use serde::Serialize;

use crate::config::{Refinement, StudyConfig};
use crate::table::{ConvergenceTable, RateBasis, TableRow};

#[derive(Debug, Clone, Serialize)]
pub struct SolverStats {
    pub method: &'static str,
    pub iterations: usize,
    pub residual: f64,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralRow {
    pub level: usize,
    pub n_flux: usize,
    pub n_pot: usize,
    pub alpha_ratio: f64,
    pub beta: f64,
    pub c_con1: f64,
    pub c_equiv: f64,
    /// Largest `||tau||_{alpha,h} / ||alpha^{-1/2} tau||_0` over random discrete fluxes.
    pub sampled_equiv_ratio: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelResult {
    pub level: usize,
    pub n_triangles: usize,
    pub n_flux: usize,
    pub n_pot: usize,
    pub h_max: f64,
    pub h_min: f64,
    pub errors: BTreeMap<String, f64>,
    /// `max_K ||div sigma_h - Q_h f||_{0,K} / |K|^{1/2}` relative to the load scale.
    pub equilibration_defect: f64,
    pub load_scale: f64,
    /// `max_K |int_K (u* - u_h)| / |K|`, when post-processing ran.
    pub mean_defect: Option<f64>,
    /// Share of the squared flux error carried by triangles touching a singular point.
    pub singular_error_share: Option<f64>,
    /// Whether the element with the largest flux error touches a singular point.
    pub max_error_touches_singular: Option<bool>,
    pub element_csv: String,
    pub solver: SolverStats,
    pub spectral: Option<SpectralRow>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub library_version: &'static str,
    pub config: StudyConfig,
    pub flux_space: String,
    pub pot_degree: usize,
    pub rate_basis: RateBasis,
    pub levels: Vec<LevelResult>,
    pub rates: BTreeMap<String, Vec<Option<f64>>>,
    pub table: ConvergenceTable,
    pub seconds: f64,
}

impl StudyReport {
    pub fn last_rate(&self, norm: &str) -> Option<f64> {
        self.table.last_rate(norm)
    }

    pub fn errors(&self, norm: &str) -> Vec<f64> {
        self.levels.iter().map(|l| l.errors[norm]).collect()
    }
}

fn graded_center(spec: &ProblemSpec) -> Point {
    spec.singular_points.first().copied().unwrap_or_else(|| {
        let ((x0, x1), (y0, y1)) = spec.domain;
        Point::new(0.5 * (x0 + x1), 0.5 * (y0 + y1))
    })
}

/// Mesh of study level `level`: the (optionally graded) base mesh refined
/// uniformly `level` times.
pub fn level_mesh(cfg: &StudyConfig, spec: &ProblemSpec, level: usize) -> anyhow::Result<Mesh> {
    let mut mesh = spec.mesh(cfg.base_cells)?;
    if cfg.refinement == Refinement::Graded && cfg.grading_passes > 0 {
        let graded = RefinementSpec::graded(graded_center(spec), cfg.grading_passes, cfg.grading_factor);
        mesh = refine(&mesh, &graded)?;
    }
    if level > 0 {
        mesh = refine(&mesh, &RefinementSpec::uniform(level))?;
    }
    Ok(mesh)
}

fn sampled_equiv_ratio(mesh: &Mesh, coeff: &CoefficientField, sigma_h: &FieldVector, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..16)
        .map(|_| {
            let c = (0..sigma_h.coefficients.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tau = FieldVector::new(sigma_h.dofmap.clone(), c).expect("matching length");
            discrete_flux_norm_alpha_h(mesh, coeff, &tau) / discrete_flux_weighted_l2(mesh, coeff, &tau)
        })
        .fold(0.0, f64::max)
}

fn singular_share(mesh: &Mesh, spec: &ProblemSpec, elements: &[ElementError]) -> Option<(f64, bool)> {
    if spec.singular_points.is_empty() {
        return None;
    }
    let touching = |t: usize| spec.singular_points.iter().any(|p| mesh.geometry(t).contains(p));
    let total: f64 = elements.iter().map(|e| e.err_l2_sq).sum();
    let near: f64 = elements.iter().filter(|e| touching(e.triangle_id)).map(|e| e.err_l2_sq).sum();
    let worst = elements.iter().max_by(|a, b| a.err_l2_sq.total_cmp(&b.err_l2_sq))?;
    Some((if total > 0.0 { near / total } else { 0.0 }, touching(worst.triangle_id)))
}

/// Solves and measures one level. Element errors are returned for export.
pub fn run_level(cfg: &StudyConfig, spec: &ProblemSpec, mesh: &Mesh, level: usize) -> anyhow::Result<(LevelResult, Vec<ElementError>)> {
    let start = Instant::now();
    let flux = cfg.flux_space()?;
    let pot = cfg.potential_degree()?;
    let coeff = spec.coefficient(mesh)?;
    let singular = spec.singular_points.clone();
    let depth = cfg.quadrature_depth;

    let t0 = Instant::now();
    let asm = AssemblyOptions { excess: 4, singular: singular.clone(), depth };
    let sys = assemble_system(mesh, &coeff, flux, pot, &*spec.f, &*spec.g, &asm)?;
    let assembly_seconds = t0.elapsed().as_secs_f64();
    let sol = solve_saddle_with(&sys, cfg.tol, cfg.solver.into())?;

    let nopts = NormOptions { excess: 4, singular: singular.clone(), depth };
    let (Some(u), Some(grad_u), Some(sigma)) = (spec.exact_u.clone(), spec.exact_grad_u.clone(), spec.exact_sigma.clone()) else {
        bail!("problem '{}' has no exact solution to measure errors against", spec.name);
    };
    let elements = element_errors(mesh, &coeff, &*sigma, &*spec.f, &sol.sigma, &nopts);
    let l2_sq: f64 = elements.iter().map(|e| e.err_l2_sq).sum();
    let div_sq: f64 = elements.iter().map(|e| e.err_div_sq).sum();

    let mut errors = BTreeMap::new();
    errors.insert("flux_l2".to_string(), l2_sq.sqrt());
    errors.insert("div".to_string(), div_sq.sqrt());
    errors.insert("hdiv".to_string(), (l2_sq + div_sq).sqrt());
    errors.insert("potential".to_string(), potential_error_dg(mesh, &coeff, &*u, &*grad_u, &*spec.g, &sol.u, &nopts));
    if cfg.norms.iter().any(|n| n == "flux_interp_l2") {
        let mopts = MomentOptions { excess: 4, singular: singular.clone(), depth };
        let interp = interpolate_flux(mesh, flux, &*sigma, &mopts)?;
        errors.insert("flux_interp_l2".into(), flux_error_weighted_l2(mesh, &coeff, &*sigma, &interp, &nopts));
    }
    let mut mean_defect = None;
    if cfg.postprocess {
        let post = stenberg_postprocess(mesh, &coeff, &sol.sigma, &sol.u, &*spec.f)?;
        mean_defect = Some(post.mean_defect(mesh, &sol.u));
        errors.insert("post".into(), potential_error_dg(mesh, &coeff, &*u, &*grad_u, &*spec.g, &post.field, &nopts));
    }

    let qopts = QuadOptions { excess: 4, singular: singular.clone(), depth };
    let q_f = l2_project(mesh, pot, &*spec.f, &qopts)?;
    let eq = equilibration(mesh, &sol.sigma, &q_f);

    let spectral = if cfg.analysis {
        let t = Instant::now();
        let r: SpectralReport = spectral_report(mesh, &coeff, flux, pot, level, &AnalysisOptions::default())?;
        Some(SpectralRow {
            level,
            n_flux: r.n_flux,
            n_pot: r.n_pot,
            alpha_ratio: r.alpha_ratio,
            beta: r.beta,
            c_con1: r.c_con1,
            c_equiv: r.c_equiv,
            sampled_equiv_ratio: sampled_equiv_ratio(mesh, &coeff, &sol.sigma, cfg.seed.wrapping_add(level as u64)),
            seconds: t.elapsed().as_secs_f64(),
        })
    } else {
        None
    };

    let share = singular_share(mesh, spec, &elements);
    let result = LevelResult {
        level,
        n_triangles: mesh.n_triangles(),
        n_flux: sys.n_flux(),
        n_pot: sys.n_pot(),
        h_max: mesh.h_max(),
        h_min: mesh.h_min(),
        errors,
        equilibration_defect: eq.relative(),
        load_scale: eq.load_scale,
        mean_defect,
        singular_error_share: share.map(|s| s.0),
        max_error_touches_singular: share.map(|s| s.1),
        element_csv: format!("elements_level{level}.csv"),
        solver: SolverStats {
            method: sol.method.tag(),
            iterations: sol.iterations,
            residual: sol.residual_norm,
            assembly_seconds,
            solve_seconds: sol.wall_time,
        },
        spectral,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((result, elements))
}

/// Runs every level and returns the report without touching the file system.
pub fn run_study_in_memory(cfg: &StudyConfig) -> anyhow::Result<(StudyReport, Vec<Vec<ElementError>>)> {
    cfg.validate()?;
    let start = Instant::now();
    let spec = get_problem(&cfg.problem, &cfg.problem_params())?;
    let basis = match cfg.refinement {
        Refinement::Uniform => RateBasis::Halving,
        Refinement::Graded => RateBasis::Dofs,
    };
    let mut table = ConvergenceTable::new(cfg.norms.clone(), basis);
    let mut levels = Vec::new();
    let mut all_elements = Vec::new();
    for level in 0..cfg.levels {
        let mesh = level_mesh(cfg, &spec, level)?;
        let (res, elements) = run_level(cfg, &spec, &mesh, level).with_context(|| format!("level {level}"))?;
        table.rows.push(TableRow {
            level,
            n_flux: res.n_flux,
            n_pot: res.n_pot,
            h_max: res.h_max,
            errors: cfg.norms.iter().map(|n| res.errors[n]).collect(),
        });
        levels.push(res);
        all_elements.push(elements);
    }
    let rates = cfg.norms.iter().map(|n| (n.clone(), table.rates(n).unwrap_or_default())).collect();
    let report = StudyReport {
        library_version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        flux_space: cfg.flux_space()?.to_string(),
        pot_degree: cfg.potential_degree()?,
        rate_basis: basis,
        levels,
        rates,
        table,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((report, all_elements))
}

/// Runs the study and writes `table.csv`, `report.json`, one element-error
/// CSV per level and, with analysis enabled, `analysis.csv`.
pub fn run_study(cfg: &StudyConfig) -> anyhow::Result<StudyReport> {
    let (report, elements) = run_study_in_memory(cfg)?;
    let dir: &PathBuf = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    report.table.write_csv(fs::File::create(dir.join("table.csv"))?)?;
    for (res, el) in report.levels.iter().zip(&elements) {
        fs::write(dir.join(&res.element_csv), element_errors_csv(el))?;
    }
    if cfg.analysis {
        let rows: Vec<SpectralReport> = report
            .levels
            .iter()
            .filter_map(|l| l.spectral.as_ref())
            .map(|s| SpectralReport {
                level: s.level,
                alpha_ratio: s.alpha_ratio,
                n_flux: s.n_flux,
                n_pot: s.n_pot,
                beta: s.beta,
                c_con1: s.c_con1,
                c_equiv: s.c_equiv,
            })
            .collect();
        fs::write(dir.join("analysis.csv"), spectral_csv(&rows))?;
    }
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}
