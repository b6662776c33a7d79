use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nonclass_core::repro::{run, ReproConfig, ReproJob, Target};
use nonclass_core::Error;

/// Reproduces the moment-matrix tables and figure datasets and runs the
/// verification suites.
#[derive(Parser, Debug)]
#[command(name = "nonclass", version)]
struct Cli {
    /// table1, table2, table3, table4, fig4, fig5, fig6, verify_multicopy,
    /// verify_circuits or verify_properties
    target: String,
    /// JSON config with optional tol, tail_tol, grid and battery fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Primary comparison tolerance of the target
    #[arg(long)]
    tol: Option<f64>,
    /// Fock-tail tolerance for automatic cutoffs
    #[arg(long = "tail-tol")]
    tail_tol: Option<f64>,
    /// Grid resolution for table3, fig4, fig5 and fig6
    #[arg(long)]
    grid: Option<usize>,
}

fn job(cli: &Cli) -> Result<ReproJob, Error> {
    let target: Target = cli.target.parse()?;
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ReproConfig::from_json(&text)?
        }
        None => ReproConfig::default(),
    };
    if cli.tol.is_some() {
        config.tol = cli.tol;
    }
    if let Some(t) = cli.tail_tol {
        config.tail_tol = t;
    }
    if cli.grid.is_some() {
        config.grid = cli.grid;
    }
    config.validate()?;
    Ok(ReproJob { target, config })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let job = match job(&cli) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("nonclass: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run(&job) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => {
            eprintln!("nonclass: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("nonclass: {}: {e}", job.target);
            return ExitCode::from(1);
        }
    };
    if let Err(e) = report.write(&cli.out) {
        eprintln!("nonclass: writing results: {e}");
        return ExitCode::from(2);
    }
    for c in &report.checks {
        eprintln!(
            "{:<6} {:<44} max residual {:.3e} (tol {:.1e}, {}/{} failed)",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.max_residual,
            c.tolerance,
            c.failures,
            c.cases
        );
    }
    if report.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
