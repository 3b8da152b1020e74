//! Experiment pipeline: wires data ingestion, grid-searched model fitting,
//! per-user calibration metrics and the group analysis into reproducible
//! runs driven by a config file. The binary in `main.rs` is a thin wrapper
//! around [`commands`].

pub mod commands;
pub mod config;

use thiserror::Error;

/// Top-level failure classes, mapped onto process exit codes:
/// 0 success, 1 experiment failure, 2 usage or I/O error.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{0}")]
    Report(String),
    #[error("experiment failed: {0}")]
    Experiment(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Experiment(_) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(format!("io error: {e}"))
    }
}
