//! Command-line driver: configuration files in, CSV profiles and JSON
//! reports out.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN on purpose

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use epshock_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_GUARD: i32 = 2;
pub const EXIT_OUT_OF_RANGE: i32 = 3;
pub const EXIT_INVALID_CONFIG: i32 = 4;
pub const EXIT_REFUSED: i32 = 5;

pub const THREADS_ENV: &str = "EPSHOCK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "epshock", version, about = "Radial transonic shocks in an Euler-Poisson nozzle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Problem file: JSON object or `key = value` lines.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "epshock-out")]
    pub out: PathBuf,
    /// Bisect a non-monotone exit-pressure map anyway (only `solve` uses it).
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for a shock at a given position.
    Forward {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        ts: f64,
    },
    /// Place the shock so the exit pressure equals `p_ex` from the config.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate exit pressure against shock position.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid: usize,
    },
    /// Report certificates, the gamma >= 2 inequality and a sensitivity check.
    Diagnose {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Forward { .. } => "forward",
            Command::Solve { .. } => "solve",
            Command::Sweep { .. } => "sweep",
            Command::Diagnose { .. } => "diagnose",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Forward { common, .. }
            | Command::Solve { common }
            | Command::Sweep { common, .. }
            | Command::Diagnose { common } => common,
        }
    }
}

/// Process exit code for a solver error.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::Domain { .. } | Error::InvalidEntrance { .. } | Error::OutOfSpan { .. } => {
            EXIT_INVALID_CONFIG
        }
        Error::OutOfRange { .. } => EXIT_OUT_OF_RANGE,
        Error::NonMonotoneMap => EXIT_REFUSED,
        Error::SonicDegeneracy { .. }
        | Error::NotSupersonic { .. }
        | Error::GuardFired { .. }
        | Error::StepFailure { .. }
        | Error::DownstreamChoked { .. }
        | Error::UpstreamSonic { .. }
        | Error::Degenerate(_) => EXIT_GUARD,
    }
}

/// Sizes the global rayon pool from `EPSHOCK_THREADS`; returns a warning
/// when the variable is set but unusable.
pub fn configure_threads() -> Option<String> {
    let raw = std::env::var(THREADS_ENV).ok()?;
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .err()
            .map(|e| format!("{THREADS_ENV}: {e}")),
        _ => Some(format!("{THREADS_ENV}={raw} is not a positive integer; using all cores")),
    }
}
