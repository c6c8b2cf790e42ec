use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("empty mask: {0}")]
    EmptyMask(String),
    #[error("eigensolver failed (info = {0})")]
    Eigensolver(i32),
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("eigenvalue within {dist:e} of contour")]
    EigenvalueOnContour { dist: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("spectral gap violated: {0}")]
    Gap(String),
    #[error("rank collapse: smallest singular value {0:e}")]
    RankCollapse(f64),
    #[error("gauge alignment failed: overlap singular value {0:e}")]
    Gauge(f64),
    #[error("Richardson check failed: {0}")]
    Richardson(String),
    #[error("eigenvalue crossing at s = {s}: overlap {overlap:.3}")]
    Crossing { s: f64, overlap: f64 },
    #[error("scenario invalid: {0}")]
    Scenario(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("step constraint: {0}")]
    Step(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an iterative or quadrature process, as opposed to bad input.
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence(_) | Error::Eigensolver(_) | Error::Richardson(_) | Error::Solve(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
