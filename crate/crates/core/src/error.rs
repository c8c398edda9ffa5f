use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("coordinate index {axis} out of range for {num_vars} variables")]
    AxisOutOfRange { axis: usize, num_vars: usize },

    #[error("series has zero constant term and is not invertible")]
    NonUnit,

    #[error("exp() needs a series with zero constant term")]
    NonZeroConstant,

    #[error("1-form is not closed: pair ({}, {}) differs at monomial {exponent}", pair.0, pair.1)]
    NotClosed {
        pair: (usize, usize),
        exponent: String,
    },

    #[error("insufficient order: need valid degree >= {needed}, have {have}")]
    InsufficientOrder { needed: u32, have: u32 },

    #[error("structure is not given by a vector potential: {0}")]
    NotPotential(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("structure has no identity field")]
    MissingIdentity,

    #[error("field is not invertible with respect to the multiplication: {0}")]
    NotInvertible(String),

    #[error("pencil is not integrable at degree {degree}: {detail}")]
    NotIntegrable { degree: u32, detail: String },

    #[error("correlator family is incomplete: missing entry {0}")]
    IncompleteFamily(String),

    #[error("master equation violated: {0}")]
    HypothesisViolation(String),

    #[error("Euler field certification failed: {0}")]
    Certification(String),

    #[error("fan size {n} exceeds the configured bound {max}")]
    FanTooLarge { n: usize, max: usize },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
}
