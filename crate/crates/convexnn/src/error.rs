//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An exact enumeration would exceed its configured budget.
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    /// The Caratheodory reduction hit a degenerate null space.
    #[error("reduction failed: {0}")]
    ReductionFailed(String),

    /// An iterative solver stopped before meeting its tolerance.
    #[error("not converged: {0}")]
    NonConverged(String),

    /// A point set does not affinely span its ambient space.
    #[error("rank deficient: {0}")]
    RankDeficient(String),

    /// A ridge profile has mass on a degree where the activation spectrum vanishes.
    #[error("parity violation at degree {degree}: coefficient {coefficient:e}")]
    ParityViolation {
        /// Offending harmonic degree.
        degree: usize,
        /// Size of the coefficient found at that degree.
        coefficient: f64,
    },

    /// A linear system could not be factorized.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A quadrature rule did not reach its tolerance.
    #[error("tolerance not met: {0}")]
    ToleranceNotMet(String),

    /// A serialized document could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        /// One-based line of the failure.
        line: usize,
        /// One-based column of the failure.
        column: usize,
        /// Parser message.
        message: String,
    },

    /// A model file carries a format version this build cannot read.
    #[error("unsupported model format version {found} (expected {expected})")]
    UnsupportedVersion {
        /// Version found in the file.
        found: u32,
        /// Version written by this build.
        expected: u32,
    },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// CSV reader or writer failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
