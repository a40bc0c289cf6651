//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape disagreement between operands; names both shapes.
    #[error("{op}: dimension mismatch: {lhs} vs {rhs}")]
    Dimension {
        op: &'static str,
        lhs: String,
        rhs: String,
    },

    /// Malformed input file; carries the byte offset or line number.
    #[error("{path}: format error at {location}: {message}")]
    Format {
        path: String,
        location: String,
        message: String,
    },

    /// Invalid argument value.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Out-of-range index (e.g. a class label outside [0, C)).
    #[error("index out of range: {0}")]
    Index(String),

    /// Non-finite value where a finite one is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Model aggregation failure.
    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dimension(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        let fmt = |s: &[usize]| {
            s.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("x")
        };
        Error::Dimension {
            op,
            lhs: fmt(lhs),
            rhs: fmt(rhs),
        }
    }

    pub(crate) fn format(path: &str, location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_string(),
            location: location.into(),
            message: message.into(),
        }
    }
}
