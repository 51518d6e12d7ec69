//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by dataset construction, estimators, and the harness.
#[derive(Debug, Error)]
pub enum CrpsError {
    /// A caller-supplied value violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical routine failed (non-PSD matrix, eigensolver breakdown, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A config file or CSV input could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A config key or value is not understood.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CrpsError>;

impl CrpsError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CrpsError::InvalidArgument(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CrpsError::Numerical(msg.into())
    }
}

/// Rejects non-finite values with a uniform message.
pub fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(CrpsError::invalid(format!("{name} must be finite, got {value}")))
    }
}

/// Rejects slices containing non-finite values.
pub fn ensure_all_finite(name: &str, values: &[f64]) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(CrpsError::invalid(format!(
                "{name}[{i}] must be finite, got {v}"
            )));
        }
    }
    Ok(())
}
