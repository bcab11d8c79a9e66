use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical fault at step {step}: {what}")]
    Numerical { step: usize, what: String },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("conversion error: leaked probability {leaked:.3e} outside bands 0 and 1")]
    Leakage { leaked: f64 },

    #[error("parse error at line {line}: {what}")]
    Parse { line: usize, what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used for the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Numerical { .. } => "numerical",
            Error::Eigen(_) => "eigen",
            Error::Usage(_) => "usage",
            Error::Leakage { .. } => "leakage",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
