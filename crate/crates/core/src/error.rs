use thiserror::Error;

/// Errors raised by the numerical routines and the file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("no nematic critical points: discriminant b^2 - 24ac = {discriminant} < 0")]
    NoNematicRoots { discriminant: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("state is not stationary: |grad|_inf = {grad_inf:e} exceeds {limit:e}")]
    NotStationary { grad_inf: f64, limit: f64 },

    #[error("linear solve failed after {iterations} iterations (residual {residual:e})")]
    LinearSolveFailure { iterations: usize, residual: f64 },

    #[error("degenerate path: total length {length:e}")]
    DegeneratePath { length: f64 },

    #[error("refined transition state is not index 1: lowest eigenvalues {eigenvalues:?}")]
    NotIndexOne { eigenvalues: Vec<f64> },

    #[error("saddle search converged to index {found}, wanted {wanted}")]
    WrongIndex {
        found: usize,
        wanted: usize,
        record: Box<crate::landscape::SaddleRecord>,
    },

    #[error("search budget exceeded: {nodes} nodes, {searches} searches")]
    BudgetExceeded { nodes: usize, searches: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
