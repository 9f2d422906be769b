//! Crate-wide error type.

use crate::dist::Support;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },

    /// The variational distribution puts mass where the target has none.
    #[error("q has support {q} but the target has support {target}; q(z) needs to be zero whenever p(z|x) is zero")]
    SupportMismatch { q: Support, target: Support },

    #[error("value {value} lies outside support {support}")]
    OutsideSupport { value: f64, support: Support },

    /// A Monte Carlo summand came out non-finite; `index` names the draw.
    #[error("non-finite summand at draw {index} (z = {z})")]
    NonFiniteSummand { index: usize, z: f64 },

    #[error("non-finite local objective at data point {index}")]
    NonFiniteLocalTerm { index: usize },

    #[error("family {family} has no reparameterization path")]
    NotReparameterizable { family: &'static str },

    #[error("quadrature did not converge: last refinements {previous} and {latest}")]
    QuadratureNoConvergence { previous: f64, latest: f64 },

    #[error("dataset line {line}: {reason}")]
    Dataset { line: usize, reason: String },
}
