use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("element {element} does not belong to group {group}")]
    ModelMismatch { group: String, element: String },
    #[error("value outside the certified exact range: {0}")]
    OutOfRange(String),
    #[error("ball enumeration exceeded the budget of {budget} elements; last complete radius {completed_radius}")]
    ResourceExhausted { budget: usize, completed_radius: u32 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("internal assertion failed: {0}")]
    Internal(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
