//! Error types shared across the library.

use thiserror::Error;

/// Errors raised by sampling, integration, measurement, and estimator code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim} exceeds the {max} precomputed prime bases")]
    UnsupportedDimension { dim: usize, max: usize },

    #[error("unit-cube coordinate {value} at row {row}, column {col} is outside (0, 1)")]
    UnitCoordinateOutOfRange { row: usize, col: usize, value: f64 },

    #[error("sample rows {first} and {second} are identical; nearest-neighbor ties would be arbitrary")]
    DuplicateSamples { first: usize, second: usize },

    #[error("length mismatch: {left} values against {right} weights")]
    ShapeMismatch { left: usize, right: usize },

    #[error("non-finite input value at index {index}")]
    NonFiniteInput { index: usize },

    #[error("implicit midpoint solve did not converge in {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("integration failed at step {step}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot resolve quantity-of-interest location: {0}")]
    LocationResolution(String),

    #[error("Rayleigh damping needs two distinct positive frequencies, got {omega1} and {omega2}")]
    DegenerateFrequencies { omega1: f64, omega2: f64 },

    #[error("failed to bracket eigenvalue root {index}")]
    RootBracketing { index: usize },

    #[error("eigenfunction index {index} outside 1..={max}")]
    EigenIndexOutOfRange { index: usize, max: usize },

    #[error("response channel has zero variance at step {step}; correlation is undefined")]
    ZeroVarianceResponse { step: usize },

    #[error("requested {requested} key conditions but only {available} measurement cells exist")]
    SelectionSize { requested: usize, available: usize },

    #[error("error covariance is not positive definite")]
    NonPositiveDefiniteCovariance,

    #[error("degenerate likelihood: effective sample size {ess:.3} below threshold {threshold} ({context})")]
    DegenerateLikelihood {
        ess: f64,
        threshold: f64,
        context: String,
    },

    #[error("database does not cover {0}")]
    DatabaseCoverage(String),

    #[error("grid is not strictly increasing at index {index}")]
    GridNotIncreasing { index: usize },

    #[error("database schema version {found} does not match supported version {expected}")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("database corrupted: {0}")]
    Corruption(String),

    #[error("posterior mass is zero everywhere")]
    DegeneratePosterior,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
