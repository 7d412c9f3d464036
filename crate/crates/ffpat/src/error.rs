//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum FfpatError {
    /// Invalid configuration value (bad grid, unstable time step, bad solver parameter).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Tensor shape does not match the declared vector space.
    #[error("shape mismatch: expected {expected:?}, got {actual:?} ({context})")]
    Shape {
        expected: Vec<usize>,
        actual: Vec<usize>,
        context: String,
    },

    /// A solve produced NaN or Inf.
    #[error("numerical divergence at step {step}: {context}")]
    Divergence { step: usize, context: String },

    /// An inner iterative solve failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Iterative solver breakdown (zero denominator with nonzero gradient).
    #[error("solver breakdown at iteration {iter}: {context}")]
    Breakdown { iter: usize, context: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// File exists but its header or payload cannot be parsed.
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, FfpatError>;

impl FfpatError {
    pub fn shape(expected: &[usize], actual: &[usize], context: &str) -> Self {
        FfpatError::Shape {
            expected: expected.to_vec(),
            actual: actual.to_vec(),
            context: context.to_string(),
        }
    }
}
