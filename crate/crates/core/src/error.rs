use thiserror::Error;

/// Errors raised by the media, eigen, speed, torus and simulation modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("unsupported representation: {0}")]
    UnsupportedRepresentation(String),

    #[error("numerical failure in {context}: {message} (last residual {residual:e})")]
    NumericalFailure {
        context: &'static str,
        message: String,
        residual: f64,
    },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("property check failed: {0}")]
    PropertyFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }

    pub(crate) fn numerical(context: &'static str, message: impl Into<String>, residual: f64) -> Self {
        Error::NumericalFailure {
            context,
            message: message.into(),
            residual,
        }
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {value}")))
    }
}
