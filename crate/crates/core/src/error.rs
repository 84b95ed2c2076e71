use thiserror::Error;

/// Errors produced by the compression, sketching and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gradient vector must have at least one entry")]
    Empty,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("duplicate index {0} in inserted subset")]
    DuplicateIndex(usize),

    #[error("incompatible operands: {field} differs ({left} vs {right})")]
    Incompatible {
        field: &'static str,
        left: String,
        right: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("hash-map enumeration needs {0} states, limit is 1000000")]
    StateSpaceTooLarge(u128),

    #[error("malformed payload: {0}")]
    Decode(String),

    #[error("diverged at iteration {iteration}: parameter norm {norm:e}")]
    Diverged { iteration: usize, norm: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn incompatible(
        field: &'static str,
        left: impl std::fmt::Display,
        right: impl std::fmt::Display,
    ) -> Self {
        Error::Incompatible {
            field,
            left: left.to_string(),
            right: right.to_string(),
        }
    }
}

pub(crate) fn ensure_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, actual })
    }
}
