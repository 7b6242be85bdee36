//! Command-line driver: config ingestion, run orchestration and bit-stable
//! artifact writing for the `collapse` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::RunConfig;
use crate::error::CliError;

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "COLLAPSE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "collapse", version, about = "Reduction dynamics of a collective coordinate")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Suppresses progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Phonon dispersion, Bogoliubov coefficients and the thin spectrum.
    Spectrum,
    /// Singular-limit table of the ground-state width over (N, omega).
    Limits,
    /// Ground state of the collective coordinate on the grid.
    Groundstate,
    /// One trajectory: CSV time series and a JSON summary.
    Simulate,
    /// Noise-free half-time and final-spread scaling sweep.
    Sweep,
    /// Dominance-time statistics over noise realizations.
    Ensemble,
    /// Outcome frequencies against the Born weights.
    Born,
    /// Field frequency and timescales of a body of given mass and size.
    Estimate {
        /// kg
        #[arg(long)]
        mass: f64,
        /// m
        #[arg(long)]
        size: f64,
        /// Superposition scale for the reduction time, m (default: x_c).
        #[arg(long)]
        x_ref: Option<f64>,
    },
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.report());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Command::Estimate { mass, size, x_ref } = cli.command {
        let estimate = commands::estimate(mass, size, x_ref)?;
        let value = serde_json::to_value(&estimate).map_err(|e| CliError::io(e.to_string()))?;
        print!("{}", output::to_json(&value));
        if let Some(dir) = &cli.out_dir {
            output::OutDir::create(dir)?.write_json("estimate.json", &estimate)?;
        }
        return Ok(());
    }
    let path = cli
        .config
        .ok_or_else(|| CliError::validation("--config: required by this subcommand"))?;
    let mut config = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = cli.out_dir {
        config.output.dir = dir;
    }
    let ctx = Context {
        config,
        threads: threads_from_env()?,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Spectrum => commands::spectrum(&ctx),
        Command::Limits => commands::limits(&ctx),
        Command::Groundstate => commands::groundstate(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Ensemble => commands::ensemble(&ctx),
        Command::Born => commands::born(&ctx),
        Command::Estimate { .. } => unreachable!("handled above"),
    }
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::validation(format!(
                "{THREADS_VAR}: expected a positive integer, got {v:?}"
            ))),
        },
    }
}
