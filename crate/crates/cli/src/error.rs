//! Error type for the command-line harness, mapping failures to the
//! documented process exit codes: 1 for validation problems, 2 for
//! convergence failures.

use rim_core::error::RimError;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable inputs, infeasible configurations.
    #[error("{0}")]
    Validation(String),
    /// A solver or retraction failed to converge.
    #[error("{0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(1),
            CliError::Convergence(_) => ExitCode::from(2),
        }
    }
}

impl From<RimError> for CliError {
    fn from(e: RimError) -> Self {
        match e {
            RimError::NonConvergence { .. }
            | RimError::DualDivergence { .. }
            | RimError::Overflow(_) => CliError::Convergence(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o error: {e}"))
    }
}
