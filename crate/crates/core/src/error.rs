use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI exit codes:
/// usage 2, domain 3, accuracy 4, resource 5.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain: {0}")]
    Domain(String),

    /// A numerical routine could not reach the requested accuracy.
    /// Carries the best estimate obtained so far.
    #[error("accuracy: {message} (best estimate {best})")]
    Accuracy { message: String, best: f64 },

    /// A required integral is not finite.
    #[error("integrability: {0}")]
    Integrability(String),

    /// Parameter validation failed; one entry per violated condition.
    #[error("invalid parameters: {}", .0.join("; "))]
    Validation(Vec<String>),

    /// A computation would exceed the configured memory budget.
    #[error("resource: {0}")]
    Resource(String),

    /// Requested feature exists in the API surface but is not implemented.
    #[error("unimplemented: {0}")]
    Unimplemented(String),

    /// Command-line / configuration usage error.
    #[error("usage: {0}")]
    Usage(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Domain(_) | Error::Validation(_) | Error::Unimplemented(_) => 3,
            Error::Accuracy { .. } | Error::Integrability(_) => 4,
            Error::Resource(_) | Error::Io(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
