//! Command-line front end for the in-SRAM NTT simulator.

mod coeffs;
mod commands;
mod config;
mod selftest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sram_ntt::{EngineError, ParamsError};
use thiserror::Error;

use crate::commands::{BenchFormat, TraceScope};
use crate::config::{ParamArgs, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid parameters: {0}")]
    Validation(String),
    #[error("line {line}: {message}")]
    FileFormat { line: usize, message: String },
    #[error("coefficient block has {got} entries, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("verification failed: {message}")]
    Verification { output: String, message: String },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification { .. } => 1,
            _ => 2,
        }
    }
}

impl From<ParamsError> for CliError {
    fn from(e: ParamsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<sram_ntt::ArithError> for CliError {
    fn from(e: sram_ntt::ArithError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<sram_ntt::SramError> for CliError {
    fn from(e: sram_ntt::SramError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<sram_ntt::BitserialError> for CliError {
    fn from(e: sram_ntt::BitserialError) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "sram-ntt", version, about = "Bit-serial in-SRAM NTT simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check (n, q, N) and print the derived roots and bank geometry
    Validate {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Multiply two polynomials in memory and check against schoolbook
    Polymul {
        #[command(flatten)]
        params: ParamArgs,
        /// Two blank-line separated coefficient blocks (a, then s);
        /// random operands from --seed if omitted
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
    },
    /// Sweep n and N, comparing simulated cycles with the closed form
    Bench {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<u32>>,
        #[arg(long, value_enum, default_value_t)]
        format: BenchFormat,
    },
    /// Dump the per-cycle micro-op trace
    Trace {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value_t)]
        scope: TraceScope,
    },
    /// Run the built-in checks
    Selftest {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn run(command: Command) -> Result<String, CliError> {
    match command {
        Command::Validate { params } => commands::validate(&RunConfig::resolve(&params)?),
        Command::Polymul { params, input } => {
            commands::polymul(&RunConfig::resolve(&params)?, input.as_deref())
        }
        Command::Bench {
            params,
            sizes,
            widths,
            format,
        } => {
            let cfg = RunConfig::resolve(&params)?;
            let (default_sizes, default_widths) = commands::default_sweep(&cfg);
            commands::bench(
                &cfg,
                &sizes.unwrap_or(default_sizes),
                &widths.unwrap_or(default_widths),
                format,
            )
        }
        Command::Trace { params, scope } => commands::trace(&RunConfig::resolve(&params)?, scope),
        Command::Selftest {
            params,
            inject_fault,
        } => selftest::run(&RunConfig::resolve(&params)?, inject_fault),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(cli.command) {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let CliError::Verification { output, .. } = &e {
                let _ = stdout.write_all(output.as_bytes());
            }
            let _ = stdout.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
