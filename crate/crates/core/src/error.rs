use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("potential is not uniformly convex: {0}")]
    NonConvex(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("quadrature did not converge on [{lo}, {hi}] after {evaluations} evaluations (error estimate {error:e}, tolerance {tolerance:e})")]
    Quadrature { lo: f64, hi: f64, evaluations: usize, error: f64, tolerance: f64 },
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("sampling envelope violated: {0}")]
    Envelope(String),
    #[error("simulation became unstable; last valid time t = {last_valid_time}")]
    Unstable { last_valid_time: f64 },
    #[error("grid mismatch: expected {expected} samples, got {got}")]
    GridMismatch { expected: usize, got: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
