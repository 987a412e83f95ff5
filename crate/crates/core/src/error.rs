use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("no connected network after {attempts} attempts")]
    Disconnected { attempts: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("{what} did not converge within {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },

    #[error("time limit of {limit_secs} s exceeded")]
    Timeout { limit_secs: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
