//! Error type shared by all modules.
//!
//! Programmer errors (shape mismatches inside a single computation, index
//! bugs) are asserted; this enum covers conditions a caller can cause or must
//! handle: invalid arguments, degenerate data, numerical non-convergence, and
//! I/O or parse failures at the CLI boundary.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Data became degenerate mid-computation (e.g. a zero-norm activation
    /// makes the cosine at that layer undefined).
    #[error("degenerate input at layer {layer}: {detail}")]
    DegenerateInput { layer: usize, detail: String },

    /// An iterative routine failed to converge; `last` carries the final
    /// iterate's value so callers can log or inspect it.
    #[error("numeric failure: {detail} (last iterate {last:.6e})")]
    NumericFailure { detail: String, last: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file (CSV/IDX/JSON config), naming the offending record.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
