use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: missing column `{0}`")]
    Schema(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("input error: {0}")]
    Input(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular input: {0}")]
    Singular(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("rank deficient design: dependent column(s) {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("separation detected in logit fit: {0}")]
    Separation(String),

    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
