use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("expected {expected:.3e} points exceeds the cap of {cap} points")]
    TooManyPoints { expected: f64, cap: u64 },

    #[error("epsilon {epsilon} is above the admissible threshold {epsilon0:.6} (need epsilon^delta < 1/4)")]
    EpsilonTooLarge { epsilon: f64, epsilon0: f64 },

    #[error("wrong process kind: {0}")]
    WrongProcess(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergent moment: E[rho^{p}] is infinite")]
    DivergentMoment { p: f64 },

    #[error("mesoscale too coarse: k*epsilon = {side} exceeds {limit}")]
    CellTooLarge { side: f64, limit: f64 },

    #[error("regime parameter k = 0 at epsilon = {0}")]
    RegimeUndefined(f64),

    #[error("annulus denominator is nonpositive at point {index} (thinning skipped?)")]
    BadAnnulus { index: usize },

    #[error("covering check failed: {0}")]
    Covering(String),

    #[error("sphere atom {index} has radius {radius:.4e} below 2h = {limit:.4e}")]
    Unresolved { index: usize, radius: f64, limit: f64 },

    #[error("solver did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("incompatible Neumann data in cell {cell}: residual {residual:.3e}")]
    Incompatible { cell: usize, residual: f64 },

    #[error("fit refused: {0}")]
    FitRefused(String),

    #[error("{failed} of {total} replicates failed; first error: {first}")]
    Ensemble { failed: usize, total: usize, first: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
