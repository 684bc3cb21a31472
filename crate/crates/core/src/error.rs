use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("insufficient sample: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("empty sample: no items left after excluding NONE/NOT_APPLICABLE")]
    EmptySample,

    #[error("kappa undefined: expected agreement is 1")]
    UndefinedKappa,

    #[error("shortfall: requested {requested}, only {available} available ({what})")]
    Shortfall {
        what: String,
        requested: usize,
        available: usize,
    },

    #[error("template `{template}` is missing a value for slot `{slot}`")]
    MissingSlot { template: String, slot: String },

    #[error("template `{template}`: {message}")]
    Template { template: String, message: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("cannot split: {0}")]
    CannotSplit(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    Training { step: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// Whether the error stems from the inputs (as opposed to the environment
    /// or a numerical failure during a run).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Training { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
