use std::path::PathBuf;
use std::process::ExitCode;

use adiabat_core::Error as CoreError;
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

/// Exit status: 2 for configuration problems, 3 for numerical guards, 4 for oracle failures.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical guard: {0}")]
    Numeric(String),
    #[error("oracle check failed: {0}")]
    Oracle(String),
}

impl CliError {
    pub fn from_core(e: CoreError) -> Self {
        match e {
            CoreError::Fit(_) | CoreError::InvalidParameter { .. } | CoreError::ZeroCount { .. } | CoreError::EmptyShell { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Oracle(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "adiabat", version, about = "Adiabatic and superadiabatic dynamics of slowly moving sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent cells.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Reject unknown config keys instead of warning.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one cell and write the time trace.
    Simulate,
    /// Run an ε ladder and fit the error exponents.
    Sweep,
    /// Compare the radiated energy by three routes.
    Radiation,
    /// Check conventions against the truncated Fock representation.
    OracleCheck,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Radiation => "radiation",
            Command::OracleCheck => "oracle-check",
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let loaded = match &cli.config {
        Some(path) => config::load(path, cli.strict)?,
        None if matches!(cli.command, Command::OracleCheck) => config::parse("{}", cli.strict)?,
        None => return Err(CliError::Config(format!("missing flag --config (required by {})", cli.command.name()))),
    };
    for key in &loaded.ignored {
        eprintln!("warning: ignoring unknown config field `{key}`");
    }
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if workers == 0 {
        return Err(CliError::Config("flag --workers must be at least 1".into()));
    }
    let opts = commands::Options { out: cli.out.as_deref(), workers };
    commands::run(cli.command.name(), &loaded, &opts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
