use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point {0} lies outside [-1, 1]")]
    Domain(f64),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid spline: {0}")]
    InvalidSpline(String),

    /// The dual polynomial is numerically constant with modulus at the level,
    /// so its level set does not determine a finite support.
    #[error("dual polynomial is numerically constant at the level set value")]
    ConstantDual,

    #[error("rank-deficient constraint system, dependent moment rows {rows:?}")]
    RankDeficient { rows: Vec<usize> },

    #[error("singular interpolation system (condition estimate {condition:e})")]
    SingularInterpolation { condition: f64 },

    #[error("solver failure: {0}")]
    Solver(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
