use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GanensError>;

#[derive(Debug, Error)]
pub enum GanensError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic bytes at offset 0 (expected \"EMB1\")")]
    BadMagic { path: PathBuf },

    #[error("{path}: truncated at offset {offset}: expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        offset: u64,
        expected: u64,
        found: u64,
    },

    #[error("{location}: non-finite value")]
    NonFinite { location: String },

    #[error("{location}: empty embedding set (rows={rows}, dim={dim})")]
    EmptySet {
        location: String,
        rows: usize,
        dim: usize,
    },

    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("dimension mismatch: {left} has dim {left_dim}, {right} has dim {right_dim}")]
    DimMismatch {
        left: String,
        left_dim: usize,
        right: String,
        right_dim: usize,
    },

    #[error("duplicate generator {0}")]
    DuplicateGenerator(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl GanensError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GanensError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        GanensError::Param(msg.into())
    }

    /// Process exit code for the CLI: 2 for data/validation problems, 3 for
    /// numeric failures. Usage errors (1) are raised by argument parsing.
    pub fn exit_code(&self) -> i32 {
        match self {
            GanensError::Numeric(_) => 3,
            _ => 2,
        }
    }
}
