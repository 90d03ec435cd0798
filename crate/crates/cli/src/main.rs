//! `qedlab` — config-driven experiments on Langevin market dynamics in a
//! quartic potential.
//!
//! Exit codes: 0 success, 2 config/input error, 3 runtime numerical error,
//! 4 shape/precondition error.

mod commands;
mod config;
mod error;
mod svg;

use clap::{Parser, Subcommand};
use error::CliError;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "qedlab", version, about = "Langevin market dynamics in a quartic potential")]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override (wins over the config value).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (wins over the config's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker thread count; falls back to QEDLAB_THREADS, then to all
    /// cores. Never changes results, only wall time.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the model potential and plot it with its critical points.
    Potential,
    /// Run a seeded Monte Carlo ensemble; write CSV, binary and summary.
    Simulate,
    /// Default-probability table over a sigma x horizon grid.
    #[command(name = "default-prob")]
    DefaultProb,
    /// Zero-noise barrier-hopping trajectory (instanton family).
    Instanton,
    /// Fit reduced-form (θ, κ, g, σ) to an observed CSV path.
    Calibrate {
        /// Input CSV with t,x rows; overrides calibrate.input.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn configure_threads(requested: Option<usize>) -> Result<(), CliError> {
    let n = match requested {
        Some(n) => Some(n),
        None => match std::env::var("QEDLAB_THREADS") {
            Ok(v) => Some(v.parse::<usize>().map_err(|_| {
                CliError::Config(format!("QEDLAB_THREADS must be a positive integer, got {v:?}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(cli.threads)?;

    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <file> is required".into()))?;
    let cfg = config::load(config_path)?;

    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;

    match cli.command {
        Command::Potential => commands::cmd_potential(&cfg, &out_dir),
        Command::Simulate => commands::cmd_simulate(&cfg, &out_dir, cli.seed),
        Command::DefaultProb => commands::cmd_default_prob(&cfg, &out_dir, cli.seed),
        Command::Instanton => commands::cmd_instanton(&cfg, &out_dir),
        Command::Calibrate { input } => commands::cmd_calibrate(&cfg, &out_dir, input),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("qedlab: {e}");
        std::process::exit(e.exit_code());
    }
}
