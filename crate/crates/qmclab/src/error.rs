use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The request is valid but exceeds what this implementation can do
    /// (e.g. exhaustive enumeration for too many spins).
    #[error("capability exceeded: {0}")]
    Capability(String),

    /// An iterative numerical method failed to converge.
    #[error("numerical failure: {what} (residual {residual:.3e})")]
    Numerical { what: String, residual: f64 },

    /// A minimal tunneling path passes through an interior state degenerate
    /// with the well energy, so the lowest-order amplitude diverges.
    #[error("degenerate tunneling path: {0}")]
    DegeneratePath(String),

    /// A sampled estimator has no usable statistics.
    #[error("insufficient sampling: {0}")]
    InsufficientSampling(String),

    /// Malformed instance file or experiment config.
    #[error("parse error (line {line}): {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
