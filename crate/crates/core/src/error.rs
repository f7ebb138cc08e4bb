use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its valid domain.
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },

    /// Input data violates a precondition (non-finite values, shape mismatch, ...).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("{path}: parse error at row {row}, column {column}: {reason}")]
    Parse {
        path: PathBuf,
        row: u64,
        column: usize,
        reason: String,
    },

    #[error("{path}: malformed file: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A fuzzy cluster has (numerically) zero total membership weight.
    #[error("cluster {cluster} has zero total membership weight")]
    DegenerateCluster { cluster: usize },

    /// The silhouette index is undefined for the given partition.
    #[error("silhouette is undefined: {0}")]
    UndefinedMetric(String),

    #[error("unsupported dimensionality: {0}")]
    Dimension(String),

    /// The membership filter kept no rows.
    #[error("{}", crate::pipeline::NO_INTERSECTION_MESSAGE)]
    NoIntersection,
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
