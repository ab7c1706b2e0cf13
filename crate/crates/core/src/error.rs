use thiserror::Error;

/// Errors produced by the kernels, projectors and optimizer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value {value} in {what} at ({row}, {col})")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("rank {rank} is out of range for a {rows}x{cols} matrix (need {constraint})")]
    InvalidRank {
        rank: usize,
        rows: usize,
        cols: usize,
        constraint: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("svd failed to converge after {0} iterations")]
    NoConvergence(usize),

    #[error("diverged at step {step}: {detail}")]
    Diverged { step: u64, detail: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
