//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A model spec, config, or argument failed validation.
    #[error("validation: {0}")]
    Validation(String),

    /// An operation would exceed a configured memory/size cap.
    #[error("capacity: {what} requires {requested} which exceeds the `{cap_name}` cap of {cap}. {advice}")]
    Capacity {
        what: String,
        requested: usize,
        cap_name: &'static str,
        cap: usize,
        advice: String,
    },

    /// Two inputs that must describe the same model/basis disagree.
    #[error("consistency: {0}")]
    Consistency(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("convergence: {0}")]
    Convergence(String),

    /// A time integration became unstable or violated an invariant.
    #[error("integration: {0}")]
    Integration(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("linear algebra: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn consistency(msg: impl Into<String>) -> Self {
        Error::Consistency(msg.into())
    }

    /// Process exit code for the CLI: 2 validation, 3 capacity, 4 convergence,
    /// 5 integration, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Consistency(_) => 2,
            Error::Capacity { .. } => 3,
            Error::Convergence(_) => 4,
            Error::Integration(_) => 5,
            _ => 1,
        }
    }
}
