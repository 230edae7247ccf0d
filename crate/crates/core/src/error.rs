use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input outside the admissible domain: {0}")]
    Domain(String),

    #[error("network series too short: need {needed} snapshots, have {have}")]
    NetworkTooShort { needed: usize, have: usize },

    #[error("non-finite value at time index {t} (explosive specification?)")]
    NonFinite { t: usize },

    #[error("specification is not stationary (rho = {rho})")]
    NotStationary { rho: f64 },

    #[error("eigenvalue computation did not converge")]
    EigenFailure,

    #[error("singular system for component {component}: {detail}")]
    Singular { component: usize, detail: String },

    #[error("missing network snapshot for time {t}")]
    MissingSnapshot { t: i64 },

    #[error("panel data: {0}")]
    Panel(String),

    #[error("experiment aborted: {failed} of {total} replicates failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
