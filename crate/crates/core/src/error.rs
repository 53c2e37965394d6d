use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid weight: {0}")]
    Weight(String),

    #[error("size mismatch: expected {expected} cells, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("function is not normalizable against the weight (Psi_m = {0})")]
    NotNormalizable(f64),

    #[error("zero function")]
    ZeroFunction,

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("kernel matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
