use thiserror::Error;

/// Errors raised by grid construction, the solvers and the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("zero pivot in tridiagonal solve at row {row}")]
    ZeroPivot { row: usize },

    #[error("row {row} of the assembled system is not strictly diagonally dominant")]
    NotDiagonallyDominant { row: usize },

    #[error("mesh ratio mismatch: scheme has lambda = {scheme}, grids give k/h = {grids}")]
    LambdaMismatch { scheme: f64, grids: f64 },

    #[error("node {0} is not on the grid")]
    OffGrid(f64),

    #[error("wave number regimes not ordered for h = {h}: {detail}")]
    RegimeOrdering { h: f64, detail: String },

    #[error("value {value} outside the admissible range {range}")]
    OutOfRange { value: f64, range: String },

    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("penalty iteration did not settle after {0} iterations")]
    PenaltyIteration(usize),

    #[error("zero denominator in successive-difference ratio")]
    ZeroDenominator,

    #[error("not enough refinement levels: need {need}, got {got}")]
    TooFewLevels { need: usize, got: usize },

    #[error("non-positive or non-finite error at level {0}")]
    BadError(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
