use thiserror::Error;

/// Errors produced by the differentiator toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is disconnected (algebraic connectivity {0:e})")]
    Disconnected(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("vector is not in the consensus subspace (off-subspace component {0:e})")]
    OffSubspace(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("conjugate solver did not converge: best value {best_value}, stationarity {gradient_norm:e}")]
    ConjugateNotConverged { best_value: f64, gradient_norm: f64 },

    #[error("conjugate gradient residual {residual:e} exceeds tolerance {tol:e}")]
    ConjugateResidual { residual: f64, tol: f64 },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("gains do not certify: margin {margin} at witness {witness:?}")]
    NotCertified { margin: f64, witness: Vec<f64> },

    #[error("level-set bisection failed: {0}")]
    Bisection(String),

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("empty window: {0}")]
    EmptyWindow(String),

    #[error("invalid time {t} (last event at {last})")]
    NonIncreasingTime { t: f64, last: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
