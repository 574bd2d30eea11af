use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invalid model: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("unsupported structure: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("malformed predicate: {0}")]
    Predicate(String),
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("linear program is {0}")]
    LpStatus(crate::lp::LpStatus),
    #[error("size guard exceeded: {0}")]
    Guard(String),
    #[error("time limit exceeded")]
    Timeout,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
