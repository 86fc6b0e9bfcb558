//! `sepsim` — batch front end for the simulation and analysis pipeline:
//! simulate -> stats -> separate / fisher / evidence / test, plus a
//! self-contained demo bundle. Runs are driven by a single TOML config and
//! are reproducible byte-for-byte.
//!
//! Exit codes: 0 success, 1 contract violation (invalid model, insufficient
//! data, divergent analysis), 2 I/O or config error.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Violated analysis contract (exit 1).
    Contract(sepsim_core::Error),
    /// Unreadable or malformed input file (exit 2).
    Io(sepsim_core::Error),
    /// Bad configuration (exit 2).
    Config(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Contract(e) | CliError::Io(e) => write!(f, "{e}"),
            CliError::Config(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl From<sepsim_core::Error> for CliError {
    fn from(e: sepsim_core::Error) -> Self {
        if e.is_io() {
            CliError::Io(e)
        } else {
            CliError::Contract(e)
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(sepsim_core::Error::Io(e))
    }
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Contract(_) => ExitCode::from(1),
            CliError::Io(_) | CliError::Config(_) => ExitCode::from(2),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "sepsim",
    version,
    about = "Event-by-event SG/EPRB simulator with density-matrix reconstruction and robustness analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate dataset CSV/JSON pairs from the [simulate] config section.
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Summarize datasets into statistics records ([stats] section).
    Stats {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Reconstruct the source density matrix ([separate] section).
    Separate {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Fisher-information estimates and cosine-family fit ([fisher] section).
    Fisher {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Evidence of an angle perturbation on one dataset ([evidence] section).
    Evidence {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// k-sigma compliance test against the quantum predictions ([test] section).
    Test {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Run the three canonical narratives end-to-end with fixed seeds.
    Demo {
        /// Output directory (or use the [demo] config section).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config } => commands::simulate(&config::load(&config)?),
        Command::Stats { config } => commands::stats(&config::load(&config)?),
        Command::Separate { config } => commands::separate(&config::load(&config)?),
        Command::Fisher { config } => commands::fisher(&config::load(&config)?),
        Command::Evidence { config } => commands::evidence(&config::load(&config)?),
        Command::Test { config } => commands::compliance(&config::load(&config)?),
        Command::Demo { out_dir, config } => {
            let from_config = config
                .map(|p| config::load(&p))
                .transpose()?
                .and_then(|c| c.config.demo.map(|d| d.out_dir));
            let out_dir = out_dir
                .or(from_config)
                .unwrap_or_else(|| PathBuf::from("demo-out"));
            commands::demo(&out_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
