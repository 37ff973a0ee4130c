use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },

    #[error("only {available} distinct eigenvector real parts available, {requested} requested")]
    InsufficientVectors { requested: usize, available: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unstable integration at t = {t}: state norm exceeded {limit:e}, use a smaller dt")]
    Unstable { t: f64, limit: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
