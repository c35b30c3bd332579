//! Crate-wide error type.

use crate::mle::FitResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("empty dataset: no valid rows ({rejected} rejected)")]
    EmptyDataset { rejected: usize },

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("spec error: {0}")]
    Spec(String),

    #[error("collinear design: column `{0}` is linearly dependent on earlier columns")]
    Collinear(String),

    #[error("insufficient data: n = {n} observations for {p} parameters")]
    InsufficientData { n: usize, p: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("family {family} does not support {operation}")]
    UnsupportedFamily { family: String, operation: String },

    #[error(
        "did not converge after {restarts} restarts: best loglik {loglik:.6}, \
         gradient norm {grad_norm:.3e}"
    )]
    NonConvergence {
        restarts: usize,
        loglik: f64,
        grad_norm: f64,
        /// Best point found, returned for diagnostics.
        best: Box<FitResult>,
    },

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("nesting violation: LR = {0:.6e} < 0 (unrestricted fit worse than restricted)")]
    NestingViolation(f64),

    #[error("singular covariance submatrix (condition number {cond:.3e})")]
    SingularCovariance { cond: f64 },

    #[error("covariance unavailable for this fit")]
    CovarianceUnavailable,

    #[error("design-matrix hash mismatch: fit was produced from different data")]
    ColumnHashMismatch,

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
