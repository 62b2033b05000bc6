use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a precondition: mismatched dimensions, non-finite input,
    /// an out-of-range parameter.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value produced at step {step}: {context}")]
    NumericOverflow { step: usize, context: String },

    #[error("spectral estimate did not converge after {iterations} iterations (best bound {bound})")]
    EstimationFailure { iterations: usize, bound: f64 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for failures caused by floating-point behaviour rather than bad
    /// input: overflow, estimator non-convergence, undefined metrics.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NumericOverflow { .. } | Error::EstimationFailure { .. } | Error::UndefinedMetric(_)
        )
    }
}
