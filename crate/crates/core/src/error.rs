use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FgnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FgnError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// gamma^2 / d must stay below 2.
    #[error("supercritical coupling: nu = gamma^2/d = {nu} (must be < 2)")]
    Supercritical { nu: f64 },

    #[error("outside the validity regime: {0}")]
    OutOfRegime(String),

    #[error("resource limit exceeded: {what} (limit {limit})")]
    Resource { what: String, limit: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FgnError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FgnError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            FgnError::InvalidKernel(_)
            | FgnError::InvalidParameter(_)
            | FgnError::Supercritical { .. }
            | FgnError::OutOfRegime(_)
            | FgnError::Config(_) => 2,
            FgnError::Numerical(_)
            | FgnError::InsufficientData(_)
            | FgnError::Parse { .. }
            | FgnError::Io { .. } => 3,
            FgnError::Resource { .. } => 4,
        }
    }
}
