use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violates a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A NaN or infinity showed up where a finite value is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A linear system could not be factored.
    #[error("singular system: {0}")]
    Singular(String),

    /// Charge neutrality has no root inside the searched Fermi-level window.
    #[error("bracket error: {0}")]
    Bracket(String),

    /// Tabular input could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The least-squares basis is (numerically) rank deficient.
    #[error("conditioning error: {0}")]
    Conditioning(String),

    /// Rate coefficients leave the stationary state undetermined.
    #[error("indeterminate state: {0}")]
    Indeterminate(String),

    /// All points of a sweep failed.
    #[error("sweep failed: {0}")]
    Sweep(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
