//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: expected {expected:?}, got {got:?}")]
    Dimension {
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("singular matrix: pivot {pivot} below threshold")]
    Singular { pivot: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("evaluation point outside weight support: x = {x}, support = [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    /// Quadrature (or series) inexactness detected by a saturation check.
    #[error("accuracy failure in {what}: change {change:.3e} exceeds {tol:.1e}; increase resolution")]
    Accuracy { what: &'static str, change: f64, tol: f64 },

    /// A family invariant failed during construction.
    #[error("ill-conditioned construction at degree {degree}: {detail} (residual {residual:.3e})")]
    IllConditioned { degree: usize, detail: &'static str, residual: f64 },

    /// An identity that must hold between computed quantities failed.
    #[error("consistency failure in {what}: residual {residual:.3e} exceeds {tol:.1e}")]
    Consistency { what: &'static str, residual: f64, tol: f64 },

    #[error("operator bandwidth contract violated: expected {expected}, got {got}")]
    Bandwidth { expected: usize, got: usize },

    #[error("lattice window exhausted: {0}")]
    Window(String),
}

pub type Result<T> = std::result::Result<T, Error>;
