use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every stage of the pipeline.
///
/// The variants map onto CLI exit codes: argument/config problems exit 1,
/// data problems exit 2, numeric failures exit 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("failed to load {}: {reason}", path.display())]
    Load { path: PathBuf, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in view {view} at row {row}, col {col}")]
    NonFinite { view: usize, row: usize, col: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("objective increased for {consecutive} consecutive iterations (trace: {trace:?})")]
    ObjectiveIncrease { consecutive: usize, trace: Vec<f64> },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping `Context` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Argument(_) | Error::Config(_) => 1,
            Error::Load { .. }
            | Error::Shape(_)
            | Error::NonFinite { .. }
            | Error::Data(_)
            | Error::Io(_) => 2,
            Error::Numeric(_) | Error::Divergence(_) | Error::ObjectiveIncrease { .. } => 3,
            Error::Context { .. } => unreachable!(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
