use thiserror::Error;

use crate::registry::LabId;

/// Every failure the simulator can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("population cap of {cap} would be exceeded")]
    CapExceeded { cap: usize },

    #[error("coordinate {index} = {value} lies outside [{lo}, {hi}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("lab {0} is dead or unknown")]
    UnknownLab(LabId),

    #[error("no living labs")]
    EmptySwarm,

    #[error("unknown landscape `{0}`")]
    UnknownLandscape(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("landscape `{0}` has no reference solution")]
    NoReference(String),

    #[error("dominance cap {cap} is infeasible for {population} labs")]
    InvalidCap { cap: f64, population: usize },

    #[error("fitness mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("front point {index} exceeds the reference point")]
    BadReference { index: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("behavior `{0}` is already registered")]
    DuplicateName(String),

    #[error("behavior `{behavior}` proposed an invalid action for lab {lab}: {reason}")]
    InvalidAction {
        behavior: String,
        lab: LabId,
        reason: String,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config key `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("malformed event log at line {line}: {reason}")]
    Replay { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(key: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, actual })
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
