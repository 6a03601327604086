//! `kpo`: spectra, trajectories, steady states and sweeps from a TOML config.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
//! failure (including failed verify checks).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kpo_core::KpoError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] KpoError),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0} verify check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::ChecksFailed(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kpo", version, about = "Kerr parametric oscillator simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, created if missing [default: current directory].
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "KPO_WORKERS")]
    workers: Option<usize>,

    /// Overrides numerics.n_trunc.
    #[arg(long = "n-trunc", global = true)]
    n_trunc: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Degenerate-pair energies, splittings and fidelities versus drive.
    Spectrum,
    /// Closed or open time evolution of the photon number.
    Evolve,
    /// Steady-state photon number and output power.
    Steady,
    /// Detuning × drive map of a steady or snapshot observable.
    Sweep,
    /// Built-in invariant checks.
    Verify,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::Verify = cli.command {
        return commands::verify(cli.n_trunc, cli.out.as_deref());
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut config = config::RunConfig::load(path)?;
    if let Some(n) = cli.n_trunc {
        config.numerics.n_trunc = n;
        config.validate()?;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    let ctx = commands::Context {
        config,
        out,
        workers: cli.workers.unwrap_or_else(kpo_core::sweep::default_workers),
    };
    match cli.command {
        Command::Spectrum => commands::spectrum(&ctx),
        Command::Evolve => commands::evolve(&ctx),
        Command::Steady => commands::steady(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Verify => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kpo: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
