use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("optimizer diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },
    #[error("{0} requires a smooth loss; hinge has no smoothness constant (use the non-smooth step rule)")]
    NonSmooth(&'static str),
    #[error("missing parameters for {theorem}: {missing:?}")]
    MissingParams { theorem: String, missing: Vec<&'static str> },
    #[error("OPT = 0 makes log(1/OPT) infinite; use the separable bounds instead")]
    SeparableCase,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Domain(msg.into()))
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Usage(msg.into()))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Validation(msg.into()))
}
