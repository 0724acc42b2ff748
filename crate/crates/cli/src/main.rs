//! `qfilter` command-line driver.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or parse failure,
//! 3 model validation failure, 4 integration failure.

mod args;
mod commands;
mod report;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Internal = 1,
    Usage = 2,
    Invalid = 3,
    Integration = 4,
}

/// An error together with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(status: Status, error: impl Into<anyhow::Error>) -> Self {
        Failure { status, error: error.into() }
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure::new(Status::Usage, anyhow::anyhow!("{msg}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Usage as u8 } else { 0 });
        }
    };
    let quiet = match &cli.command {
        Command::Validate(a) => a.quiet,
        Command::Simulate(a) | Command::Ensemble(a) | Command::Master(a) => a.common.quiet,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet { "error" } else { "warn" }))
        .format_timestamp(None)
        .init();

    let result = match &cli.command {
        Command::Validate(a) => commands::validate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Ensemble(a) => commands::ensemble(a),
        Command::Master(a) => commands::master(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.status as u8)
        }
    }
}
