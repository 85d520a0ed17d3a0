use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("time {t} outside schedule range [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid site(s) {0} for ring of {1} spins")]
    InvalidSite(String, usize),

    #[error("qubit count {0} outside supported range {1}..={2}")]
    UnsupportedSize(usize, usize, usize),

    #[error("energy did not converge before dt fell below {floor} (last change {last_change:.3e})")]
    NotConverged { floor: f64, last_change: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    #[error("Lie closure dimension exceeded cap {cap} (N = {n})")]
    ClosureCapExceeded { cap: usize, n: usize },

    #[error("state lies outside the +1 symmetry sector (sector weight {0:.3e})")]
    OutsideSector(f64),

    #[error("eigendecomposition failed: {0}")]
    Diagonalization(String),

    #[error("annealing time search gave up: doubling exceeded cap {cap:e}")]
    TimeCapExceeded { cap: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
