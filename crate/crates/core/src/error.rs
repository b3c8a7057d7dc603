//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// The variants map onto the CLI exit codes: configuration problems exit
/// with 2, solver failures with 3, and assumption refusals with 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad parameter ranges, malformed documents,
    /// incompatible bases).
    #[error("configuration error: {0}")]
    Config(String),

    /// A structural assumption required by the requested operation does not
    /// hold. `name` is the assumption label, e.g. `(A6)` or `(A7)`.
    #[error("assumption {name} violated: {detail}")]
    Assumption { name: String, detail: String },

    /// A scalar solver (root finder or quadrature) failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The Newton inner solve of a time step diverged.
    #[error(
        "newton solve failed at t = {time}: residual {residual:.3e} after {iterations} iterations"
    )]
    Step {
        time: f64,
        residual: f64,
        iterations: usize,
    },

    /// Two fields or operators refer to different eigenbases.
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }

    pub fn assumption(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Assumption {
            name: name.into(),
            detail: detail.into(),
        }
    }

    /// Exit code this error maps to in the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::BasisMismatch(_) => 2,
            Error::Numerical(_) | Error::Step { .. } | Error::Io(_) => 3,
            Error::Assumption { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
