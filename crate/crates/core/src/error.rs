use thiserror::Error;

/// Errors produced by the certification pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("measure is not flagged symmetric")]
    NotSymmetric,
    #[error("measure has no absolutely continuous part on (0, inf) but positive tail there")]
    NoDensity,
    #[error("invalid convex function: {0}")]
    InvalidFunction(String),
    #[error("slopes exceed the truncation bound on both sides; no admissible clip point")]
    Unbounded,
    #[error("infimum convolution is -inf: {0}")]
    UnboundedBelow(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("slope bound violated: max |f'| = {max_slope} exceeds {bound}")]
    SlopeBoundViolated { max_slope: f64, bound: f64 },
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),
    #[error("measure is not in the tail-ratio class: ratio {ratio} > lambda {lambda} at x = {witness}")]
    NotInClass { ratio: f64, lambda: f64, witness: f64 },
    #[error("unsupported set family: {0}")]
    UnsupportedSet(String),
    #[error("base set has zero empirical mass")]
    EmptyBase,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
