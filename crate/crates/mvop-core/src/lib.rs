//! Matrix-valued orthogonal polynomials under matrix-exponential weight
//! deformations `W(x;t) = e^{-t L(x)} W(x)`, where the symbol `L(x)` is a
//! matrix polynomial symmetric for the weight's inner product.
//!
//! The library constructs the monic families, extracts the banded difference
//! operator `M(t)` attached to a symbol (bands `G_j(n;t)`), evolves the
//! non-Abelian Toda-type equations those bands satisfy, assembles the
//! equivalent Lax pair, and ships the Hermite-type weight
//! `e^{-x^2} e^{xA} e^{xA*}` with its closed forms as the analytic oracle
//! for all of it.
//!
//! Modules mirror the pipeline:
//! - [`linalg`]: dense complex matrices, solves, matrix exponential
//! - [`quadrature`]: Gauss-Hermite / composite Gauss-Legendre rules
//! - [`weight`]: matrix polynomials, weight specs, the symmetry class
//! - [`mvop`]: moments and monic family construction
//! - [`diffop`]: band extraction, weak Pearson checks, operator composition
//! - [`toda`]: lattice flows, RK4 integration, fd validators
//! - [`lax`]: block band matrices, the bracket, Lax verification
//! - [`hermite`]: the Hermite-type example and its closed forms
//! - [`export`]: reproducible JSON/CSV output
//!
//! With the default `parallel` feature, node evaluations and per-index band
//! computations run on rayon; results are collected in index order so output
//! is bit-identical with and without the feature.

pub mod diffop;
pub mod error;
mod exec;
pub mod export;
pub mod hermite;
pub mod lax;
pub mod linalg;
pub mod mvop;
pub mod quadrature;
pub mod toda;
pub mod weight;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use linalg::CMatrix;
pub use weight::{MatrixPolynomial, WeightSpec};
