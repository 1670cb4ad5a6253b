use thiserror::Error;

pub type Result<T> = std::result::Result<T, InferaError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferaError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("distribution has zero total mass")]
    ZeroMass,
    #[error("size cap exceeded: {what} needs {needed}, cap is {cap}")]
    SizeCap { what: &'static str, needed: usize, cap: usize },
    #[error("conditioning event x_{index} = {value} has zero probability")]
    InsufficientSupport { index: usize, value: usize },
    #[error("operation requires a binary alphabet, got alphabet size {0}")]
    UnsupportedAlphabet(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("profile entry {index} = {value} is outside (0, 1]")]
    InvalidProfile { index: usize, value: f64 },
    #[error("prior is not positively affiliated (violating pair {0} / {1})")]
    NotAffiliated(usize, usize),
    #[error("coordinate {0} has no context with positive probability")]
    DegenerateDistribution(usize),
    #[error("influence matrix has unbounded entries")]
    Unbounded,
    #[error("spectral norm {0} is not below 1")]
    SpectralNormTooLarge(f64),
    #[error("linear program ended with status {0}")]
    LpFailed(String),
    #[error("fixed-point iteration did not converge after {iterations} steps (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}
