use thiserror::Error;

#[derive(Debug, Error)]
pub enum TamError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph sampling failed after {attempts} attempts (n={n}, d={d})")]
    SamplingFailure { n: usize, d: usize, attempts: usize },

    #[error("inconsistent input: {0}")]
    Inconsistency(String),

    /// Iterative solver ran out of iterations. `best` is the last estimate
    /// of the quantity being computed (leading singular value for the SVD
    /// routines).
    #[error("{what} did not converge within {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("invalid subspace: {0}")]
    InvalidSubspace(String),

    #[error("truncation produced a rank-deficient factor (sigma_k = {sigma_k:.3e})")]
    DegenerateTruncation { sigma_k: f64 },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, TamError>;

pub(crate) fn invalid(msg: impl Into<String>) -> TamError {
    TamError::InvalidParameter(msg.into())
}
