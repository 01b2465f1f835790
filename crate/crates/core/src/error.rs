use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a structural or numerical precondition.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    /// A function was evaluated outside the set where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A dense path was requested above its dimension cap.
    #[error("resource cap exceeded: dimension {dim} > cap {cap} ({what})")]
    ResourceCap { what: String, dim: usize, cap: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), reason: reason.into() }
    }

    /// Rename the field of a validation error, leaving other variants untouched.
    pub fn in_field(self, field: &str) -> Self {
        match self {
            Error::Validation { reason, .. } => Error::Validation { field: field.to_string(), reason },
            other => other,
        }
    }
}
