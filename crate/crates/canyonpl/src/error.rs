//! Crate-wide error type.
//!
//! One flat enum: the pipeline surfaces either an I/O failure, a parse
//! failure with file/line context, or a domain-level shape/value problem.

use std::fmt;
use std::io;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Underlying file or stream failure.
    Io(io::Error),
    /// A text input could not be parsed. Carries the source label
    /// (usually a path), the 1-based line number, and a description.
    Parse {
        source_label: String,
        line: usize,
        message: String,
    },
    /// Inputs are structurally valid but violate a pipeline invariant
    /// (dimension mismatch, empty training set, inconsistent link data).
    Invalid(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Parse {
                source_label,
                line,
                message,
            } => write!(f, "{source_label}:{line}: {message}"),
            Error::Invalid(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

impl Error {
    /// Shorthand for a parse error at a known line.
    pub fn parse(source_label: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_label: source_label.to_string(),
            line,
            message: message.into(),
        }
    }

    /// Shorthand for an invariant violation.
    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }
}
