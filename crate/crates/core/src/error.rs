use thiserror::Error;

/// Errors produced anywhere in the precoder pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid cluster plan: {0}")]
    InvalidPlan(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("point lies outside the trust region: {0}")]
    TrustRegion(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown minorant: {0}")]
    UnknownMinorant(String),

    #[error("solver backend failure: {0}")]
    Backend(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
