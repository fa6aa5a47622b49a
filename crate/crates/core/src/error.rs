use thiserror::Error;

/// Errors surfaced by the control library and simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matching residual {residual:.3e} exceeds strict limit {limit:.3e}")]
    MatchingResidual { residual: f64, limit: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("simulation diverged at step {step}: non-finite state")]
    NumericBlowup { step: usize },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn config(path: impl ToString, message: impl ToString) -> Self {
        Error::Config {
            path: path.to_string(),
            message: message.to_string(),
        }
    }
}
