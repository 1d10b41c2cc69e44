//! Exact truncated power-series arithmetic over ℚ and ℚ(𝐢).

mod gauss;
mod series;

pub use gauss::{fmt_rat, rat, rat_to_f64, GaussRational, Rational};
pub use series::{ExponentVector, Pairing, SeriesVector, TruncatedSeries};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("variable count mismatch: {left} vs {right}")]
    NvarsMismatch { left: usize, right: usize },
    #[error("truncation cap mismatch: {left} vs {right}")]
    CapMismatch { left: usize, right: usize },
    #[error("substitution {index} has a nonzero constant term")]
    ConstantTerm { index: usize },
    #[error("series has zero constant term and cannot be inverted")]
    NotUnit,
    #[error("map is not a near-identity transformation")]
    NotNearIdentity,
    #[error("invalid conjugation pairing: {0}")]
    InvalidPairing(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty series vector")]
    Empty,
}
