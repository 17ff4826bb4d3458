use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("dimension mismatch for {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate user_id `{0}`")]
    DuplicateUser(String),

    #[error("user `{0}` has no posts")]
    EmptyUser(String),

    #[error("user `{user}`: {message}")]
    Ordering { user: String, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot stratify: class `{class}` has {count} users, need at least {needed}")]
    Stratify {
        class: String,
        count: usize,
        needed: usize,
    },

    #[error("anchor pool is empty")]
    EmptyPool,

    #[error("channel file misaligned for user `{user}` at index {idx}")]
    Misaligned { user: String, idx: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("only one class present in {0}")]
    SingleClass(String),

    #[error("every feature is constant; no split is possible")]
    ConstantFeatures,

    #[error("requested {requested} features but only {available} are available")]
    TooManyFeatures { requested: usize, available: usize },

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("empty input: {0}")]
    Empty(String),

    #[error("training diverged at epoch {epoch}: {reason}; last good checkpoint is epoch {}", checkpoint.best_epoch)]
    Diverged {
        epoch: usize,
        reason: String,
        checkpoint: Box<crate::nn::TrainedModel>,
    },
}

impl Error {
    pub fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for command-line front ends: 2 for I/O and file
    /// format problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Format { .. }
            | Error::DimensionMismatch { .. }
            | Error::DuplicateUser(_)
            | Error::EmptyUser(_)
            | Error::Ordering { .. }
            | Error::Misaligned { .. } => 2,
            _ => 1,
        }
    }
}
