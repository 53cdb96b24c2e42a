use std::path::PathBuf;

use thiserror::Error;

use crate::config::Experiment;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("malformed config: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    Invalid(String),

    #[error("{experiment}: {source}")]
    Module { experiment: Experiment, source: integrable_core::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("malformed report: {0}")]
    Report(String),
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 3 for failures
    /// inside a run or while writing its output.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Read { .. } | Self::Parse(_) | Self::Invalid(_) => 2,
            Self::Module { .. } | Self::Write { .. } | Self::Report(_) => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
