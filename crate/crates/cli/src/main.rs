use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rmix_cli::table::{ConvergenceTable, RateBasis};
use rmix_cli::{run_study, StudyConfig};
use rmix_core::mesh::{read_mesh, EdgeClass};

/// Thread cap for element loops.
const THREADS_ENV: &str = "STUDY_THREADS";

#[derive(Parser)]
#[command(name = "study", version, about = "Mixed finite element convergence studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a TOML config.
    Run { config: PathBuf },
    /// Recompute observed rates from a table.csv.
    Rates {
        table: PathBuf,
        /// Measure rates against flux DOF count instead of halving h.
        #[arg(long)]
        dofs: bool,
    },
    /// Print statistics of a mesh file.
    MeshInfo { mesh: PathBuf },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV}='{v}' is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn rates(path: &PathBuf, dofs: bool) -> anyhow::Result<()> {
    let basis = if dofs { RateBasis::Dofs } else { RateBasis::Halving };
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let table = ConvergenceTable::read_csv(file, basis)?;
    let mut header = vec!["level".to_string()];
    header.extend(table.norms.iter().map(|n| format!("rate_{n}")));
    println!("{}", header.join(","));
    let rates: Vec<Vec<Option<f64>>> = table.norms.iter().map(|n| table.rates(n).unwrap_or_default()).collect();
    for (i, row) in table.rows.iter().enumerate().skip(1) {
        let cells: Vec<String> = rates
            .iter()
            .map(|r| r[i - 1].map(|v| format!("{v:.4}")).unwrap_or_else(|| "nan".into()))
            .collect();
        println!("{},{}", row.level, cells.join(","));
    }
    Ok(())
}

fn mesh_info(path: &PathBuf) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mesh = read_mesh(&text)?;
    let count = |c: EdgeClass| mesh.edge_class.iter().filter(|&&e| e == c).count();
    println!("vertices        {}", mesh.n_vertices());
    println!("triangles       {}", mesh.n_triangles());
    println!("edges           {}", mesh.n_edges());
    println!("  interior      {}", count(EdgeClass::Interior));
    println!("  dirichlet     {}", count(EdgeClass::Dirichlet));
    println!("  interface     {}", (0..mesh.n_edges()).filter(|&e| mesh.is_interface(e)).count());
    println!("subdomains      {}", mesh.n_subdomains());
    println!("area            {:.6e}", mesh.total_area());
    println!("h_min           {:.6e}", mesh.h_min());
    println!("h_max           {:.6e}", mesh.h_max());
    println!("max h/inradius  {:.4}", mesh.max_shape_ratio());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Run { config } => {
            let cfg = StudyConfig::load(&config)?;
            let report = run_study(&cfg)?;
            println!("wrote {} ({} levels, {:.2} s)", cfg.output_dir.display(), report.levels.len(), report.seconds);
            for n in &cfg.norms {
                if let Some(r) = report.last_rate(n) {
                    println!("  {n:<16} last rate {r:.3}");
                }
            }
            Ok(())
        }
        Command::Rates { table, dofs } => rates(&table, dofs),
        Command::MeshInfo { mesh } => mesh_info(&mesh),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.downcast_ref::<rmix_core::Error>().map_or("Other", rmix_core::Error::kind);
            let record = serde_json::json!({ "error": format!("{e:#}"), "kind": kind });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
