use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// One violated configuration bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub bound: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.bound)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter(s): {}", join(.0))]
    InvalidParameter(Vec<Violation>),

    #[error("sampler returned a non-finite value at x={x}, y={y}, fiber={fiber}")]
    NonFiniteSample { x: f64, y: f64, fiber: i64 },

    #[error("operands were built on different configurations")]
    ConfigMismatch,

    #[error("module element leaks {tail:e} beyond the window (limit {limit:e})")]
    TailOverflow { tail: f64, limit: f64 },

    #[error("E-action used before the convention oracles passed in this session")]
    ConventionUnvalidated,

    #[error("trace calibration inconsistent: relative spread {spread:e} over {samples} pairs")]
    CalibrationInconsistent { spread: f64, samples: usize },

    #[error("exponential series did not converge (norm {norm}, {terms} terms)")]
    ConvergenceBudgetExceeded { norm: f64, terms: usize },

    #[error("probe value {value:e} too small at x={x}")]
    ProbeIllConditioned { x: f64, value: f64 },

    #[error("element is not unitary: |u u* - I| = {defect:e}")]
    NotUnitary { defect: f64 },

    #[error("perturbation is not skew-adjoint in direction {direction}: defect {defect:e}")]
    NotSkewAdjoint { direction: &'static str, defect: f64 },

    #[error("perturbation basis is degenerate: Gram condition number {condition:e}")]
    DegenerateBasis { condition: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("configuration file not found: {}", .0.display())]
    ConfigNotFound(PathBuf),

    #[error("unknown check: {0}")]
    UnknownCheck(String),

    #[error("unknown suite: {0}")]
    UnknownSuite(String),

    #[error("malformed serialized element: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
