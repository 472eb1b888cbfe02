use thiserror::Error;

/// Errors raised by the solver kernels and builders.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is numerically rank deficient (sigma_min/sigma_max = {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("matrix is numerically singular")]
    Singular,
    #[error("zero vector cannot define a patch")]
    ZeroVector,
    #[error("polynomials do not share a common homogeneous degree in the group")]
    MixedDegrees,
    #[error("expected {expected} correspondences, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error("could not draw a non-degenerate instance after {0} attempts")]
    Degenerate(usize),
    #[error("found {found} distinct start points, expected {expected}")]
    DeficientCount { found: usize, expected: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
