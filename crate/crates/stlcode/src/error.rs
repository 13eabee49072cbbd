//! Error type shared by every module of the crate.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failures the library can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed arguments: dimension mismatches, empty matrices, bad
    /// hyperparameters.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An observation lies outside the data domain of its family.
    #[error("domain error: {0}")]
    Domain(String),

    /// A text file (CSV, config, model) could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An iterative method produced a non-finite intermediate.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A model file is corrupt, truncated, or has an unknown version.
    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// An error raised by a named stage of the training pipeline.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidInput(msg.to_string())
    }

    pub fn domain(msg: impl fmt::Display) -> Self {
        Error::Domain(msg.to_string())
    }

    pub fn numerical(msg: impl fmt::Display) -> Self {
        Error::Numerical(msg.to_string())
    }

    /// Attach a pipeline stage name to an error as it propagates.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code for the CLI: input problems and numerical
    /// failures are distinguishable by code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
