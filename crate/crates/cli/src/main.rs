mod check;
mod commands;
mod config;
mod output;

use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use rabi2::spectrum::SpectrumError;
use thiserror::Error;

use config::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("refused: {0}")]
    Collapse(String),
    #[error("{0}")]
    Internal(String),
    #[error("invariant check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Collapse(_) => 3,
            CliError::CheckFailed(_) => 4,
        }
    }
}

impl From<SpectrumError> for CliError {
    fn from(e: SpectrumError) -> Self {
        match e {
            SpectrumError::CollapseGuard { .. } => CliError::Collapse(e.to_string()),
            SpectrumError::InvalidWindow { .. }
            | SpectrumError::InvalidOptions(_)
            | SpectrumError::GridTooLarge { .. }
            | SpectrumError::ZeroCoupling
            | SpectrumError::Model(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

fn run(command: &Command) -> Result<commands::Report, CliError> {
    match command {
        Command::Spectrum(args) => commands::spectrum(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Gtrace(args) => commands::gtrace(args),
        Command::Juddian(args) => commands::juddian(args),
        Command::Oracle(args) => commands::oracle(args),
        Command::Check(args) => check::check(args),
    }
}

fn jobs(command: &Command) -> Option<usize> {
    match command {
        Command::Spectrum(a) => a.run.jobs,
        Command::Sweep(a) => a.run.jobs,
        Command::Gtrace(a) => a.run.jobs,
        Command::Oracle(a) => a.run.jobs,
        Command::Check(a) => a.run.jobs,
        Command::Juddian(_) => None,
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs(&cli.command) {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Internal(e.to_string()))?;
    let report = pool.install(|| run(&cli.command))?;
    let stdout = io::stdout().lock();
    report.table.write(io::BufWriter::new(stdout), report.format, cli.command.name(), &report.config)?;
    io::stdout().flush().map_err(|e| CliError::Internal(e.to_string()))?;
    report.status
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rabi2 {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
