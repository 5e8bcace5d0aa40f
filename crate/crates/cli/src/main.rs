//! `dmosum`: calibrate thresholds, generate panels, monitor data and run the
//! simulation studies.
//!
//! Exit codes: 0 success, 1 I/O failure on output, 2 configuration error,
//! 3 data error.

mod commands;
mod config;

use std::fmt;
use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Experiment;
use crate::config::{opt_key, Flags, Resolver};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(s) => write!(f, "configuration error: {s}"),
            CliError::Data(s) => write!(f, "data error: {s}"),
            CliError::Io(s) => write!(f, "i/o error: {s}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "dmosum", version, about = "Distributed MOSUM changepoint detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical values of the global test from the limit process
    Calibrate(Flags),
    /// Write a synthetic panel as headerless CSV
    Generate(Flags),
    /// Monitor a CSV panel and report the stopping time
    Detect(Flags),
    /// Run a replicated study
    Experiment {
        #[arg(value_enum)]
        name: Experiment,
        #[command(flatten)]
        flags: Flags,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (label, flags) = match &cli.command {
        Command::Calibrate(f) => ("calibrate".to_string(), f),
        Command::Generate(f) => ("generate".to_string(), f),
        Command::Detect(f) => ("detect".to_string(), f),
        Command::Experiment { name, flags } => (format!("experiment {}", name.label()), flags),
    };
    if let Some(n) = flags.threads {
        if n == 0 {
            return Err(CliError::Config("threads: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    let mut r = Resolver::new(label, flags.clone())?;
    let out = opt_key!(r, out);
    let body = match cli.command {
        Command::Calibrate(_) => commands::calibrate(&mut r)?,
        Command::Generate(_) => commands::generate(&mut r)?,
        Command::Detect(_) => commands::detect(&mut r)?,
        Command::Experiment { name, .. } => commands::experiment(name, &mut r)?,
    };
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match out {
        Some(path) => {
            std::fs::write(&path, &body).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
            let echo = format!("{path}.config.toml");
            std::fs::write(&echo, r.echo()).map_err(|e| CliError::Io(format!("{echo}: {e}")))?;
        }
        None => {
            std::io::stdout().write_all(&body).map_err(io)?;
            eprint!("{}", r.echo());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dmosum: {e}");
            ExitCode::from(e.code())
        }
    }
}
