use thiserror::Error;

use crate::model_params::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library.
///
/// The CLI maps these onto exit codes through [`Error::kind`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is not on the unit simplex: {0}")]
    NotOnSimplex(String),

    #[error("point lies on the boundary of the simplex (component {index} = {value})")]
    BoundaryInput { index: usize, value: f64 },

    #[error("polynomial degree {degree} exceeds the cap {cap}")]
    DegreeCap { degree: usize, cap: usize },

    #[error("basis dimension {size} exceeds the cap {cap}")]
    BasisTooLarge { size: usize, cap: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error(transparent)]
    Invalid(#[from] ValidationReport),

    #[error("theorem hypothesis violated: gamma[{i}][{j}] = {value} must be > 0")]
    Hypothesis { i: usize, j: usize, value: f64 },

    #[error("model admits no NUPBR-plus-arbitrage regime for these parameters")]
    NoArbitrage,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("pseudo-inverse residual {residual:e} exceeds tolerance (point outside E or degenerate gamma)")]
    Residual { residual: f64 },

    #[error("regression is rank deficient (smallest/largest eigenvalue ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("non-positive wealth {0}")]
    NonPositiveWealth(f64),

    #[error("non-positive value in {what} at row {row}, column {col}: {value}")]
    NonPositive {
        what: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("time stamps must be strictly increasing (row {0})")]
    NonIncreasingTime(usize),

    #[error("too few observations: need at least {need}, got {got}")]
    TooFewObservations { need: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFinite(_) | Error::Residual { .. } | Error::RankDeficient { .. } => {
                ErrorKind::Numerical
            }
            Error::Io(_) | Error::Parse(_) => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
