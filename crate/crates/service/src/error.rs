use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid request: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] arena_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        ServiceError::Validation(msg.into())
    }
}

pub type ServiceResult<T> = Result<T, ServiceError>;
