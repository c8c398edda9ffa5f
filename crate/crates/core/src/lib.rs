//! Exact verification workbench for F-manifolds with compatible flat
//! structure.
//!
//! Everything is computed over [`Rational`] coefficients in truncated
//! multivariate power series, so every identity check is an exact equality
//! up to an explicitly tracked degree.

pub mod correlators;
pub mod duality;
pub mod error;
pub mod euler;
pub mod expr;
pub mod fmanifold;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod permutofan;
pub mod series;
pub mod suite;

pub use error::{Error, Result};
pub use series::{ExponentVector, TruncatedSeries};

/// Exact arbitrary-precision rational.
pub type Rational = num_rational::BigRational;

/// Shorthand for the rational `num/den`.
pub fn q(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}
