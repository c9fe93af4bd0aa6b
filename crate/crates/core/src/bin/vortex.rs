use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vortex_core::cli_io::{run_file, EXIT_VALIDATION};

/// Vortex and monopole solvers.
#[derive(Parser, Debug)]
#[command(name = "vortex", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write raw field dumps next to the manifest.
    #[arg(long)]
    dump_fields: bool,
    /// Seed for randomised checks.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("VORTEX_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
            }
            _ => {
                eprintln!("VORTEX_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(EXIT_VALIDATION as u8);
            }
        }
    }
    let outcome = run_file(&cli.config, cli.out.as_deref(), cli.dump_fields, cli.seed);
    if let Some(m) = &outcome.manifest {
        for row in &m.results {
            println!(
                "{} {:<32} value={:<14.6e} target={:<12.4e} tol={:.2e}",
                if row.pass { "PASS" } else { "FAIL" },
                row.name,
                row.value,
                row.target,
                row.tolerance
            );
        }
        for w in &m.warnings {
            eprintln!("warning: {w}");
        }
    }
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    ExitCode::from(outcome.exit_code as u8)
}
