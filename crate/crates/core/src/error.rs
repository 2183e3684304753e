use thiserror::Error;

/// Errors raised by estimation, inference and the data loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch on {axis}: expected {expected}, found {found}")]
    Dimension {
        axis: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite log-likelihood contribution at unit {unit}, period {period}")]
    NonFinite { unit: usize, period: usize },

    #[error("rank-deficient matrix: column {column} has no independent direction")]
    RankDeficient { column: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("fit on {subsample} failed: {source}")]
    Subsample {
        subsample: String,
        #[source]
        source: Box<Error>,
    },

    #[error("no candidate number of factors could be fitted: {0}")]
    AllCandidatesFailed(String),

    #[error("{failed} of {total} Monte Carlo replications failed (limit is under 5%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
