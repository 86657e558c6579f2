use thiserror::Error;

/// Errors raised anywhere in the audit pipeline.
#[derive(Debug, Error)]
pub enum AuditError {
    /// Invalid configuration: shapes, budgets, or experiment invariants.
    #[error("configuration error: {0}")]
    Config(String),

    /// A well-formed call received an input it cannot accept.
    #[error("input error: {0}")]
    Input(String),

    /// A numeric argument fell outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Optimization produced non-finite values.
    #[error("training error: {0}")]
    Training(String),

    /// Persisted artifacts are missing, truncated, or malformed.
    #[error("artifact error: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl AuditError {
    /// Process exit code used by the CLI: 2 for configuration problems, 3 for
    /// everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            AuditError::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = AuditError> = std::result::Result<T, E>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(AuditError::Config(msg.into()))
}
