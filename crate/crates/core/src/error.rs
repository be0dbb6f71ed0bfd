use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::norms::NormResult;

/// Side of the dyadic window on which a norm sum failed to converge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Annuli shrinking toward the origin (k -> -inf).
    Inner,
    /// Annuli growing toward infinity (k -> +inf).
    Outer,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Inner => f.write_str("origin (k -> -inf)"),
            Direction::Outer => f.write_str("infinity (k -> +inf)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum HerzError {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("missing parameter `{0}`")]
    MissingField(String),

    #[error("gradient undefined at {0}")]
    UndefinedGradient(String),

    #[error("missing derivative for multi-index {0:?}")]
    MissingDerivative(Vec<u32>),

    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),

    #[error("non-integrable singularity: {0}")]
    NonIntegrable(String),

    #[error("dimension {0} is not supported for non-radial data (n <= 3)")]
    DimensionUnsupported(usize),

    #[error("norm diverges toward {direction}; partial value {}", partial.value)]
    Divergence {
        direction: Direction,
        partial: Box<NormResult>,
    },

    #[error("divergent tail: {0}")]
    DivergentTail(String),

    #[error("grid resolution insufficient: {0}")]
    Resolution(String),

    #[error("region is not dyadic-aligned: {0}")]
    NotDyadicAligned(String),

    #[error("parameters outside the construction's regime: {0}")]
    RegimeViolation(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, HerzError>;
