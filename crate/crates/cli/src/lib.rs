//! Experiment runner: configuration files, multi-seed runs, λ sweeps,
//! the lending sweep, aggregation and an exact-evaluation debug command.

pub mod aggregate;
pub mod config;
pub mod lending;
pub mod oracle_cmd;
pub mod presets;
pub mod run;

use conseq::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error:\n{0}")]
    Config(String),
    #[error("{0}")]
    Ingest(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Ingest(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        CliError::Ingest(format!("{}: {err}", path.display()))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::ConditionalUnavailable => CliError::Config(e.to_string()),
            Error::Ingest { .. } | Error::Io(_) | Error::EmptyData(_) | Error::GroupAbsent(_) => {
                CliError::Ingest(e.to_string())
            }
            Error::NonFinite { .. } | Error::ZeroPropensity { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

/// Shortest decimal that round-trips to the same `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v}")
}
