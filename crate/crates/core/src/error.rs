use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("no data rows")]
    NoData,

    #[error("value {value} of item `{item}` lies outside its scale [{min}, {max}]")]
    Range {
        item: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("network error after {attempts} attempt(s): {message}")]
    Network { attempts: usize, message: String },

    #[error("malformed response: {message}; body starts with {snippet:?}")]
    MalformedResponse { message: String, snippet: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
