//! Library side of the `clustersend` binary: run specifications, Monte Carlo
//! campaigns, analytic reports, verification suites and expected-case curve sweeps. The
//! binary is a thin clap layer over these functions, so everything here is
//! also usable from tests.

pub mod analyze;
pub mod robustness;
pub mod simulate;
pub mod spec;
pub mod stats;
pub mod sweep;
pub mod verify;

use thiserror::Error;

pub use simulate::{
    run_trial, run_trial_traced, simulate, write_csv, SimulationReport, TrialFailure, TrialRow,
    CSV_HEADER,
};
pub use spec::{RunSpec, SpecArgs};
pub use stats::{Summary, SweepResult, SweepResultRow};

/// Environment variable holding the default number of worker threads.
pub const THREADS_ENV: &str = "CLUSTERSEND_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration.
    #[error("{0}")]
    Usage(String),
    /// A safety or liveness check failed.
    #[error("{0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invariant(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}
