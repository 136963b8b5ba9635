use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time must be positive and finite, got {0}")]
    NonPositiveTime(f64),

    #[error("number of time steps must be at least 1")]
    ZeroSteps,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} is not finite at node {node}")]
    NonFinite { what: &'static str, node: usize },

    #[error("path summand {value:e} exceeds overflow threshold (seed {seed}, path {path})")]
    Overflow { seed: u64, path: u64, value: f64 },

    #[error("magnetic field matrix is not skew-symmetric at ({row}, {col})")]
    NotSkewSymmetric { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariance factorization failed after maximal jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("lattice has {sites} sites, cap is {cap}")]
    SiteCapExceeded { sites: usize, cap: usize },

    #[error("site index {index} out of range (lattice has {sites} sites)")]
    SiteOutOfRange { index: usize, sites: usize },

    #[error("quadrature box too small: estimated tail mass {tail:e} exceeds tolerance {tolerance:e}")]
    QuadratureBoxTooSmall { tail: f64, tolerance: f64 },

    #[error("custom vector potentials cannot be serialized")]
    NotSerializable,
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
