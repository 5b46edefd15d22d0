//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by matrix kernels, entropy functionals and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a precondition (dimensions, finiteness, invariants).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A matrix that must be (strictly) positive definite is singular,
    /// or an eigenvalue fell outside the domain of a matrix function.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// An iterative method exhausted its iteration budget.
    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
