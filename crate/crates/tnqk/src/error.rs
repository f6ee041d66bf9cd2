//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A request exceeded a hard resource guard (e.g. statevector qubit cap).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A circuit does not have the structure a backend requires
    /// (e.g. an entangling gate crossing a block boundary).
    #[error("structure violation: {0}")]
    StructureViolation(String),

    /// A binary file failed to parse; `offset` is the byte position of the
    /// first inconsistency.
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    /// A text file failed to parse; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            msg: msg.into(),
        }
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
