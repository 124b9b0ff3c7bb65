//! Error types shared across the crate.
//!
//! Errors carry a coarse category so that the CLI can map failures to
//! machine-readable exit codes without string matching.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad hyper-parameter, shape mismatch,
    /// unsupported bit width, out-of-range fault target, unknown key.
    #[error("configuration error: {0}")]
    Config(String),

    /// Binary file does not match its declared format.
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Training diverged (NaN/inf loss).
    #[error("training diverged: {0}")]
    Diverged(String),
}

impl Error {
    /// Stable category tag, used by the CLI for exit codes and stderr output.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Diverged(_) => "diverged",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
