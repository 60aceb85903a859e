use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the factorization library and its harness.
#[derive(Debug, Error)]
pub enum SwiftError {
    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("index {index:?} out of bounds for shape {shape:?}")]
    OutOfBounds { index: Vec<usize>, shape: Vec<usize> },

    #[error("duplicate coordinate {0:?}")]
    DuplicateCoordinate(Vec<usize>),

    #[error("invalid value {value} at {index:?}: {reason}")]
    InvalidValue {
        index: Vec<usize>,
        value: f64,
        reason: &'static str,
    },

    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("invalid cost matrix: {0}")]
    Cost(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unbalanced marginals: {0}")]
    Unbalanced(String),

    #[error("dimension too large: {0}")]
    TooLarge(String),

    #[error("non-finite scaling in mode {mode}, column {column}, iteration {iteration}")]
    NonFiniteScaling {
        mode: usize,
        column: usize,
        iteration: usize,
    },

    #[error("non-finite objective at outer iteration {iteration}: {detail}")]
    NonFiniteObjective { iteration: usize, detail: String },

    #[error("KL divergence undefined: {0}")]
    KlUndefined(String),

    #[error("empty tensor")]
    EmptyTensor,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{phase}: {source}")]
    Phase {
        phase: String,
        #[source]
        source: Box<SwiftError>,
    },
}

/// Coarse error category, used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Numerical,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Input => 2,
            ErrorCategory::Numerical => 3,
            ErrorCategory::Io => 4,
        }
    }
}

impl SwiftError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            SwiftError::NonFiniteScaling { .. }
            | SwiftError::NonFiniteObjective { .. }
            | SwiftError::KlUndefined(_) => ErrorCategory::Numerical,
            SwiftError::Io { .. } => ErrorCategory::Io,
            SwiftError::Phase { source, .. } => source.category(),
            _ => ErrorCategory::Input,
        }
    }

    /// Wraps the error with the name of the phase that produced it.
    pub fn in_phase(self, phase: impl Into<String>) -> SwiftError {
        SwiftError::Phase {
            phase: phase.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> SwiftError {
        SwiftError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, SwiftError>;
