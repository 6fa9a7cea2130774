use thiserror::Error;

/// Errors raised by the allocators, reward models and harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("point {x} lies outside the domain [0, 1]")]
    Domain { x: f64 },

    #[error("allocation is not on the simplex: {0}")]
    Simplex(String),

    #[error("sample {sample} is outside the admissible range [-{bound}, {bound}]")]
    SampleRange { sample: f64, bound: f64 },

    #[error("sign test is already decided")]
    AlreadyDecided,

    #[error("reward function {index} is not concave: gradient increases from {left} to {right}")]
    NotConcave { index: usize, left: f64, right: f64 },

    #[error("not enough checkpoints for a slope fit: {0}")]
    InsufficientCheckpoints(String),

    #[error("division by zero: {0}")]
    ZeroMean(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
