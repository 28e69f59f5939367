use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian (zero pivot in column {0})")]
    SingularJacobian(usize),

    #[error("bound breach: sup|Phi| = {value:.3e} exceeds guard {guard:.3e}")]
    BoundBreach { value: f64, guard: f64 },

    #[error("continuation step {step} failed: {source}")]
    Continuation { step: usize, source: Box<Error> },

    #[error("fit unstable: {0}")]
    FitUnstable(String),

    #[error("eigensolver breakdown: {0}")]
    Eigen(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
