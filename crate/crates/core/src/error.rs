use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("step size too large: {0}")]
    StepSize(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("non-finite driver value at scenario {scenario}, step {step}, node {node}")]
    NonFinite {
        scenario: usize,
        step: usize,
        node: usize,
    },

    #[error("assumption violated at step {step}: {detail}")]
    AssumptionViolation { step: usize, detail: String },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (last difference {last_diff:e})")]
    Divergence { iterations: usize, last_diff: f64 },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
