//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A file could not be parsed; carries the 1-based line number.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    /// Input violated a documented precondition or invariant.
    #[error("{0}")]
    Validation(String),

    /// A node has no counterpart with positive model weight, so its
    /// closed-form update is undefined.
    #[error("degenerate node `{id}`: all counterparts have zero model weight in the {role} update")]
    DegenerateNode { id: String, role: &'static str },

    /// Every pair in a distance bin is degenerate.
    #[error("degenerate distance bin {bin}: no pair with positive model weight")]
    DegenerateBin { bin: usize },

    /// The poisson-normal objective was asked to divide by a zero mean.
    #[error("model mean is zero for pair ({origin}, {destination}) under the poisson-normal objective")]
    ZeroMean { origin: String, destination: String },

    /// A configuration the surface accepts but the runtime rejects.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for numerical-degeneracy errors (CLI exit code 3), as opposed
    /// to input/usage errors (exit code 2).
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateNode { .. } | Error::DegenerateBin { .. } | Error::ZeroMean { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
