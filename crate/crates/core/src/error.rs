use std::io;

use thiserror::Error;

/// Errors produced anywhere in the inference pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("simulation left the finite range at step {step}")]
    NonFinite { step: usize },

    #[error("matrix is not symmetric positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotSpd { min_eigenvalue: f64 },

    #[error("relative Hessian asymmetry {asymmetry:e} exceeds tolerance {tolerance:e}")]
    AsymmetryExceeded { asymmetry: f64, tolerance: f64 },

    #[error("shape mismatch at layer {layer}: expected {expected}, got {got}")]
    ShapeMismatch { layer: usize, expected: usize, got: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("truth vector of sample {index} has zero norm")]
    ZeroNormTruth { index: usize },

    #[error("truth vectors are all identical; coefficient of determination undefined")]
    DegenerateTruths,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("internal bug: {0}")]
    Bug(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures caused by numerics rather than inputs or I/O.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::NotSpd { .. } | Error::AsymmetryExceeded { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
