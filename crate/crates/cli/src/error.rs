use harmneg_core::Error as CoreError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("oracle mismatch at N={n}: analytic {analytic:e}, oracle {oracle:e}, tolerance {tolerance:e}")]
    OracleMismatch { n: usize, analytic: f64, oracle: f64, tolerance: f64 },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), message: err.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(CoreError::EnumerationTooLarge { .. }) => 3,
            CliError::Core(CoreError::InsufficientTruncation { .. }) => 4,
            CliError::OracleMismatch { .. } => 5,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config_invalid",
            CliError::Core(CoreError::EnumerationTooLarge { .. }) => "budget_exceeded",
            CliError::Core(CoreError::InsufficientTruncation { .. }) => "truncation_insufficient",
            CliError::Core(_) => "numerical",
            CliError::OracleMismatch { .. } => "oracle_mismatch",
            CliError::Io { .. } => "io",
        }
    }

    /// Machine-readable form written to stderr on failure.
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() })
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
