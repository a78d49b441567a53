use thiserror::Error;

/// Errors raised across the library. Variant names mirror the failure
/// conditions of each operation so callers can match on the exact cause.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // scales and measures
    #[error("scale levels must be strictly increasing (level {index} = {value})")]
    NonMonotone { index: usize, value: f64 },
    #[error("scale level {value} lies outside [0, 1]")]
    OutOfRange { value: f64 },
    #[error("expected {expected} labels, got {got}")]
    LabelMismatch { expected: usize, got: usize },
    #[error("a scale needs at least two levels, got {0}")]
    TooFewLevels(usize),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    // feedback synthesis
    #[error("oracle {oracle} is outside the interval [{lower}, {upper}]")]
    IntervalViolation { oracle: f64, lower: f64, upper: f64 },
    #[error("degenerate interval at {level} cannot carry oracle {oracle}")]
    DegenerateInterval { level: f64, oracle: f64 },
    #[error("oracle {oracle} is outside the scale range [{min}, {max}]")]
    OracleOutOfScale { oracle: f64, min: f64, max: f64 },
    #[error("measure mean {mean} differs from oracle {oracle}")]
    BiasedMeasure { mean: f64, oracle: f64 },
    #[error("sample is empty")]
    EmptySample,

    // losses
    #[error("label {0} is outside [0, 1]")]
    LabelOutOfRange(f64),
    #[error("beta must be positive, got {0}")]
    NonpositiveBeta(f64),
    #[error("hinge margin must be positive, got {0}")]
    NonpositiveMargin(f64),

    // couplings
    #[error("row {row} of the coupling sums to {sum}, not 1")]
    RowNotStochastic { row: usize, sum: f64 },
    #[error("row {row} has conditional mean {mean}, expected fine level {level}")]
    BarycenterViolation { row: usize, mean: f64, level: f64 },
    #[error("coarse marginal at level {index} is {got}, expected {expected}")]
    MarginalMismatch { index: usize, got: f64, expected: f64 },

    // complexity
    #[error("exact enumeration is infeasible: {0}")]
    InfeasibleExact(String),
    #[error("hypothesis class is empty")]
    EmptyClass,
    #[error("invalid hypothesis class: {0}")]
    InvalidClass(String),
    #[error("item {0} has no label")]
    MissingLabel(String),

    // training and data
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("loss became non-finite at epoch {0}")]
    NonfiniteLoss(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
