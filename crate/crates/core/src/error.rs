//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qudit dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("amplitude vector has length {got}, expected {expected}")]
    BadAmplitudeCount { expected: usize, got: usize },

    #[error("state norm squared is {0}, outside tolerance of 1")]
    NotNormalized(f64),

    #[error("phase vector has length {got}, expected {expected}")]
    BadPhaseCount { expected: usize, got: usize },

    #[error("probability {value:.3e} at index {index} is below the round-off clamp")]
    NegativeProbability { index: usize, value: f64 },

    #[error("probabilities sum to {0}, expected 1")]
    UnnormalizedDistribution(f64),

    #[error("oracle matrix is not unitary (max deviation {0:.3e})")]
    NonUnitaryOracle(f64),

    #[error("message ({m1},{m2}) outside the alphabet of size {d_prime}")]
    InvalidMessage {
        m1: usize,
        m2: usize,
        d_prime: usize,
    },

    #[error("unknown channel variant `{0}`")]
    UnknownChannelVariant(String),

    #[error("ansatz has {got} angles, expected {expected}")]
    BadAngleCount { expected: usize, got: usize },

    #[error("network shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("empty probability vector")]
    EmptyDistribution,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
