use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("endpoint {0} has no finite ternary resolution (exact Cantor mass unavailable)")]
    NonTriadicEndpoint(Rational),

    #[error("invalid interval set: {0}")]
    InvalidSet(String),

    #[error("invalid measure at {path}: {reason}")]
    InvalidMeasure { path: String, reason: String },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("point {point} is not interior to cell {cell}")]
    PointNotInterior { cell: usize, point: Rational },

    #[error("cell index {0} out of range")]
    CellOutOfRange(usize),

    #[error("cell {cell}: nu mass {nu} exceeds base mass {base}")]
    BaseDominationViolated {
        cell: usize,
        nu: Box<Rational>,
        base: Box<Rational>,
    },

    #[error("partition is not a refinement of the requested coarse partition")]
    NotARefinement,

    #[error("a_n decreased at round {round}: {previous} -> {current}")]
    MonotonicityViolation { round: usize, previous: f64, current: f64 },

    #[error("zero gain at round {round}, cell {cell} but sub-cell values differ ({left} vs {right})")]
    JensenEqualityViolation {
        round: usize,
        cell: usize,
        left: Box<Rational>,
        right: Box<Rational>,
    },

    #[error("cell count did not increase at round {0}")]
    CellCountNotIncreasing(usize),

    #[error("min-norm solver did not reach gap {tol:e} in {iterations} iterations (gap {gap:e})")]
    IterationBudgetExceeded { iterations: usize, gap: f64, tol: f64 },

    #[error("value {0} outside the domain [0, 1]")]
    DomainError(Rational),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("parse error at {path}: {reason}")]
    Parse { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
