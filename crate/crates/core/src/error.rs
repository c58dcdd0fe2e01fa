use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::jet::JetError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{context}: {source}")]
    Domain { context: String, source: EvalError },

    #[error(transparent)]
    Jet(#[from] JetError),

    #[error("degenerate metric at {point:?} (det = {det:e})")]
    DegenerateMetric { point: Vec<f64>, det: f64 },

    #[error("{count} of {samples} sample points hit a degenerate metric (first at {first:?})")]
    TooManyDegenerate { count: usize, samples: usize, first: Vec<f64> },

    #[error("quadrature did not converge after {levels} bisection levels")]
    NonConvergence { levels: u32 },

    #[error("TooFewVectors: got {got} null vectors, need at least {needed}")]
    TooFewVectors { got: usize, needed: usize },

    #[error("NonGenericConfiguration: null space has dimension {nullity}, expected 1")]
    NonGenericConfiguration { nullity: usize },

    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attaches the sample point to a degeneracy reported by a pointwise kernel.
    pub fn at_point(self, point: &[f64]) -> Error {
        match self {
            Error::DegenerateMetric { det, .. } => Error::DegenerateMetric {
                point: point.to_vec(),
                det,
            },
            other => other,
        }
    }
}
