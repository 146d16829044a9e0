use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two fields (or a field and an operator) live on different truncations.
    #[error("truncation mismatch: {0}")]
    Truncation(String),

    /// The time integrator produced a non-finite or runaway state.
    #[error("integration failure at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed field data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
