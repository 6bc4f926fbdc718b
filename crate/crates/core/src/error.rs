//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SpdeError>;

#[derive(Debug, Error)]
pub enum SpdeError {
    /// A caller supplied a value outside the documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A computation produced a non-finite or non-positive quantity where a
    /// positive finite one was required.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file. `line` is 1-based; 0 means the location is unknown.
    #[error("parse error{}: {message}", location(*.line, .key))]
    Parse {
        line: usize,
        key: String,
        message: String,
    },
}

impl SpdeError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SpdeError::InvalidArgument(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        SpdeError::NumericalDegeneracy(msg.into())
    }
}

fn location(line: usize, key: &str) -> String {
    match (line, key.is_empty()) {
        (0, true) => String::new(),
        (0, false) => format!(" in key {key:?}"),
        (l, true) => format!(" at line {l}"),
        (l, false) => format!(" at line {l} ({key})"),
    }
}
