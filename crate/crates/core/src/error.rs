use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("composite space: {0}")]
    CompositeSpace(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid state: {0}")]
    StateValidity(String),
    #[error("invalid channel: {0}")]
    ChannelValidity(String),
    #[error("branch probability {q:e} for test state {index} is below threshold")]
    BranchProbability { index: usize, q: f64 },
    #[error("theta extraction failed: {reason} (fit residual {residual:e}, tolerance {tol:e})")]
    Extraction { reason: String, residual: f64, tol: f64, theta_grid: Vec<(f64, f64)> },
    #[error("outcome function: {0}")]
    OutcomeFunction(String),
    #[error("Bloch vector: {0}")]
    Bloch(String),
    #[error("distribution: {0}")]
    Distribution(String),
    #[error("conservation law violated: max deviation {0:e}")]
    Conservation(f64),
    #[error("implementation does not realize the target channel: Choi deviation {0:e}")]
    Realization(f64),
    #[error("pointer charge is not diagonal in the outcome basis: max off-diagonal {0:e}")]
    YanaseCondition(f64),
    #[error("assumption violated: {0}")]
    Assumption(String),
}

pub type Result<T> = std::result::Result<T, Error>;
