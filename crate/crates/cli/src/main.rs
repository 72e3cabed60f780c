//! `steklov` command-line driver.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 solver failure,
//! 4 I/O failure or missing input, 5 a validation check exceeded its
//! tolerance. On failure a JSON error record goes to stderr and, when the
//! output directory is writable, to `error.json`.

mod commands;
mod config;
mod plots;
mod report;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, ConfigError, RunConfig};
use report::ErrorRecord;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Solver(steklov::Error),
    #[error(transparent)]
    Io(std::io::Error),
    #[error("{0}")]
    MissingInput(String),
}

impl From<steklov::Error> for CliError {
    fn from(e: steklov::Error) -> Self {
        match e {
            steklov::Error::Io(e) => CliError::Io(e),
            e => CliError::Solver(e),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Solver(_) => "solver",
            CliError::Io(_) => "io",
            CliError::MissingInput(_) => "missing-input",
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) | CliError::MissingInput(_) => 4,
        }
    }
}

const CHECK_FAILED: u8 = 5;

fn fail(err: &CliError, out: Option<&std::path::Path>) -> ExitCode {
    let record = ErrorRecord { kind: err.kind(), exit_code: err.code().into(), message: err.to_string() };
    let text = serde_json::to_string(&record).unwrap_or_else(|_| err.to_string());
    eprintln!("{text}");
    if let Some(dir) = out.filter(|d| d.is_dir()) {
        let _ = std::fs::write(dir.join("error.json"), text + "\n");
    }
    ExitCode::from(err.code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::from_cli(cli) {
        Ok(c) => c,
        Err(e) => return fail(&e.into(), None),
    };
    if let Some(n) = cfg.threads {
        steklov::par::init_workers(n);
    }
    match commands::run(&cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{} check failed; see {}", cfg.command.name(), cfg.out.join("report.json").display());
            ExitCode::from(CHECK_FAILED)
        }
        Err(e) => fail(&e, Some(&cfg.out)),
    }
}
