use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input bytes: bad magic, truncated stream, illegal flag.
    #[error("format error: {0}")]
    Format(String),

    /// Caller violated a precondition (bad dimensions, out-of-range QP, ...).
    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("capacity exceeded: need {needed} bits, available {available}")]
    Capacity { needed: usize, available: usize },

    /// STC cannot satisfy the syndrome without flipping a wet position.
    #[error("stc embedding infeasible: {0}")]
    Infeasible(String),

    #[error("extraction failed: {0}")]
    Extraction(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Process exit code used by the CLI: 2 format, 3 capacity, 4 extraction.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format(_) => 2,
            Error::Capacity { .. } => 3,
            Error::Extraction(_) => 4,
            _ => 1,
        }
    }
}
