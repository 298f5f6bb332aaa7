//! Crate-wide error type and the CLI exit-code mapping.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, ScopeError>;

#[derive(Debug, Error)]
pub enum ScopeError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("backend {provider} unreachable after {attempts} attempts: {detail}")]
    BackendUnavailable {
        provider: String,
        attempts: u32,
        detail: String,
    },

    #[error("backend {provider} returned a bad response: {detail}")]
    BackendResponse { provider: String, detail: String },

    #[error("embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("zero-magnitude embedding vector")]
    ZeroVector,

    #[error("internal invariant broken: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ScopeError {
    /// Exit code contract: 0 success, 2 config error, 3 backend failure,
    /// 4 input error. Internal bugs fall back to 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScopeError::Config(_) | ScopeError::DimensionMismatch { .. } => 2,
            ScopeError::BackendUnavailable { .. }
            | ScopeError::BackendResponse { .. }
            | ScopeError::ZeroVector => 3,
            ScopeError::Input(_) | ScopeError::Io(_) => 4,
            ScopeError::Internal(_) => 1,
        }
    }
}
