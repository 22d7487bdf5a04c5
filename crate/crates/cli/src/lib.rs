//! Config-driven batch front end: `modes`, `gate`, `cooling` and `sweep`
//! subcommands writing CSV and JSON reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{RunConfig, Scheme};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mixion", version, about = "Normal modes, gate design and cooling analysis for mixed-species ion chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the gate scheme.
    #[arg(long, global = true, value_enum)]
    pub scheme: Option<Scheme>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Mode table and spectral statistics.
    Modes,
    /// Design an entangling pulse.
    Gate,
    /// Coolant participation and position fluctuations.
    Cooling,
    /// One row per value of the configured sweep axis.
    Sweep,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let cfg = config::load(path, cli.seed, cli.scheme)?;
    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Modes => commands::cmd_modes(&cfg, &cli.out),
        Command::Gate => commands::cmd_gate(&cfg, &cli.out),
        Command::Cooling => commands::cmd_cooling(&cfg, &cli.out),
        Command::Sweep => commands::cmd_sweep(&cfg, &cli.out),
    }
}
