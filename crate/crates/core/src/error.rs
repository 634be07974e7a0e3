use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An input is valid in principle but cannot be represented in double precision.
    #[error("range error: {0}")]
    Range(String),

    /// A covariance or Kronecker system is singular.
    #[error("singular system: {0}")]
    Singular(String),

    #[error("Fock truncation too small: cutoff {cutoff} leaves tail {tail:.3e}, need cutoff >= {required}")]
    Truncation {
        cutoff: usize,
        required: usize,
        tail: f64,
    },

    #[error("usage error: {0}")]
    Usage(String),

    /// Iterative numerics (quadrature, series) did not converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
