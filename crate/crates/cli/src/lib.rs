//! Batch front end for the recycling Krylov solvers: scenario files, sweeps and run comparison.

pub mod compare;
pub mod config;
pub mod run;

use std::path::{Path, PathBuf};

use krylov_recycle::coupled::CoupledError;
use krylov_recycle::{HistoryError, OperatorError, SolverError};
use thiserror::Error;

pub use compare::{compare_runs, Comparison, RunStats};
pub use config::{Overrides, Scenario};
pub use run::{run_scenario, threads_from_env, ScenarioOutcome, Status};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    History { path: PathBuf, source: HistoryError },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Coupled(#[from] CoupledError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Schema problems in a compared history.
    pub fn is_schema_mismatch(&self) -> bool {
        matches!(self, Self::History { source: HistoryError::SchemaMismatch(_), .. })
    }
}
