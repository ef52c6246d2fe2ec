//! `durability` command-line tool.
//!
//! Exit codes: 0 success, 2 usage, 3 invalid input or numeric failure,
//! 4 a reference table cell disagreed.

mod args;
mod commands;
mod config;
mod report;

use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use args::{Cli, Command, Format};
use config::Resolver;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Invalid(_) => 3,
        }
    }
}

const MISMATCH: u8 = 4;

fn run(cli: Cli) -> Result<u8, CliError> {
    let mut r = Resolver::from_path(cli.config.as_deref())?;
    let default_format = match cli.command {
        Command::Coldsim(_) => Format::Csv,
        Command::Fit(_) | Command::Avail(_) => Format::Json,
        _ => Format::Table,
    };
    let format = r.or("format", cli.format, default_format)?;
    let output = r.get("output", cli.output)?;
    let mut report = match cli.command {
        Command::Mttdl(a) => commands::mttdl(&mut r, a)?,
        Command::Table(a) => commands::table(&mut r, a)?,
        Command::Coldsim(a) => commands::coldsim(&mut r, a)?,
        Command::Fit(a) => commands::fit(&mut r, a)?,
        Command::Avail(a) => commands::avail(&mut r, a)?,
        Command::Profile(a) => commands::profile(&mut r, a)?,
    };
    report.config = r.effective();
    for n in &report.notices {
        eprintln!("notice: {n}");
    }
    let text = report.render(format);
    match output {
        Some(path) => {
            std::fs::write(&path, text).map_err(|e| CliError::Invalid(format!("output {}: {e}", path.display())))?
        }
        None => print!("{text}"),
    }
    Ok(if report.mismatch { MISMATCH } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
