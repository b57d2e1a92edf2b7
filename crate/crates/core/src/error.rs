use thiserror::Error;

/// Errors raised across the sampling library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unsupported dimension {dim} (max {max})")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("point {point:?} lies outside the domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("covariance factorization failed (pivot {pivot} at jitter {jitter:e})")]
    Factorization { pivot: usize, jitter: f64 },

    #[error("all {restarts} hyperparameter restarts failed")]
    HyperparameterSearch { restarts: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root finding did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("simulation diverged at step {step}")]
    SimulationDiverged { step: usize },

    #[error("singular summary covariance")]
    SingularCovariance,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("all importance ratios are degenerate")]
    DegenerateWeights,
}

pub type Result<T> = std::result::Result<T, Error>;
