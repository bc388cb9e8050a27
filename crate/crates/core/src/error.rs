use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// The quadrature error estimate exceeded the caller's ceiling.
    #[error("quadrature error estimate {estimate:e} exceeds ceiling {ceiling:e}")]
    Resolution { estimate: f64, ceiling: f64 },
    /// Neither direction of a finite-difference perturbation keeps the
    /// measure admissible.
    #[error("no admissible perturbation: {0}")]
    Admissibility(String),
    #[error("system size {n} outside the enumeration range 1..={limit}")]
    Size { n: usize, limit: usize },
}
