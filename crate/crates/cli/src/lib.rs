//! Configuration-driven experiment runner for the `bridgekernel` checks.
//!
//! A run reads one JSON [`ExperimentConfig`], dispatches its `command` to
//! the library and renders the result, together with the effective config
//! and a provenance block, as JSON or CSV.

pub mod commands;
pub mod config;
pub mod output;

use bridgekernel::Error;
use thiserror::Error as ThisError;

pub use commands::{execute, Outcome, Table};
pub use config::{Command, ExperimentConfig, Format, SCHEMA_VERSION};
pub use output::{render, Provenance};

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const SCHEMA: i32 = 2;
    pub const ABORT: i32 = 3;
}

#[derive(Debug, ThisError)]
pub enum RunError {
    /// The config does not validate, or its parameters are rejected.
    #[error("schema violation: {0}")]
    Schema(String),
    /// The computation stopped on a numerical failure.
    #[error("numerical abort: {0}")]
    Abort(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Schema(_) => exit::SCHEMA,
            Self::Abort(_) | Self::Io(_) => exit::ABORT,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Overflow { .. }
            | Error::NonFinite { .. }
            | Error::Factorization { .. }
            | Error::QuadratureBoxTooSmall { .. } => Self::Abort(e.to_string()),
            Error::NonPositiveTime(_)
            | Error::ZeroSteps
            | Error::DimensionMismatch { .. }
            | Error::NotSkewSymmetric { .. }
            | Error::InvalidArgument(_)
            | Error::SiteCapExceeded { .. }
            | Error::SiteOutOfRange { .. }
            | Error::NotSerializable => Self::Schema(e.to_string()),
        }
    }
}

/// Exit status for a finished run.
pub fn exit_code(outcome: &Outcome) -> i32 {
    match outcome.pass {
        Some(false) => exit::CHECK_FAILED,
        _ => exit::OK,
    }
}
