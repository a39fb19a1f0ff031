//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors raised by construction, modeling, solving, and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A vector with near-zero norm cannot be normalized onto the sphere.
    #[error("vector norm {norm:.3e} is too small to normalize")]
    DegenerateVector { norm: f64 },

    /// A matrix claimed to be a rotation fails the orthogonality/determinant
    /// check.
    #[error("matrix is not a proper rotation (defect {defect:.3e})")]
    NotARotation { defect: f64 },

    /// A waveplate stage was built with invalid parameters.
    #[error("invalid waveplate stage: {0}")]
    InvalidStage(String),

    /// A chain must contain at least one stage.
    #[error("chain must contain at least one stage")]
    EmptyChain,

    /// A control vector does not match the chain's stage count (or, for
    /// solvers, the system dimensions disagree).
    #[error("dimension mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// A task projection selected an invalid set of output rows.
    #[error("invalid task projection: {0}")]
    InvalidProjection(String),

    /// A linear system is singular at the configured rank tolerance.
    #[error("{context}: system is singular at the configured tolerance")]
    Singular { context: &'static str },

    /// A solver that requires a square system was handed a rectangular one.
    #[error("{context}: expected a square system, got {rows}x{cols}")]
    NotSquare {
        context: &'static str,
        rows: usize,
        cols: usize,
    },

    /// The task Jacobian handed to the extended solver does not have full row
    /// rank, so the square extended system cannot be formed reliably.
    #[error("task Jacobian is rank deficient (rank {rank}, need {required})")]
    RankDeficient { rank: usize, required: usize },

    /// A configuration value is out of its documented range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
