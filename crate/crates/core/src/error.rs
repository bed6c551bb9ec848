//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("matrix market parse error: {0}")]
    MatrixMarket(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Pivot block of a node is singular to working tolerance.
    #[error("singular pivot at node {node} (level {level}, size {size})")]
    SingularPivot {
        node: String,
        level: usize,
        size: usize,
    },

    /// One-sided Jacobi sweep cap exceeded; never silently truncated.
    #[error("SVD did not converge after {sweeps} sweeps on a {rows}x{cols} block")]
    SvdNonConvergence {
        sweeps: usize,
        rows: usize,
        cols: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
