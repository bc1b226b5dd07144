use thiserror::Error;

pub type Result<T, E = QramError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QramError {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Exhaustive enumeration would exceed the configured state cap.
    #[error("enumeration needs {states} states, cap is {cap}")]
    Capacity { states: u128, cap: u128 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("training diverged: {0}")]
    Training(String),

    #[error("cannot load weights: {0}")]
    Load(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl QramError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        QramError::Contract(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        QramError::Argument(msg.into())
    }
}
