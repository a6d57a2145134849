use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("root finder did not converge in bracket [{lo}, {hi}] after {iterations} iterations")]
    RootNotConverged { lo: f64, hi: f64, iterations: usize },

    #[error("duplicate interpolation nodes at indices {first} and {second} (tau = {value})")]
    DuplicateNodes { first: usize, second: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },

    #[error(transparent)]
    Solver(#[from] crate::nlpsolve::SolveError),

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
