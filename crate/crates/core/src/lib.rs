//! Parametric variational inference for scalar latent-variable models.
//!
//! Fits a parametric variational posterior `q_theta(z)` to the posterior of a
//! joint model `p(x, z)` by maximizing the evidence lower bound (ELBO). The
//! crate provides:
//!
//! - elementary densities with deterministic, splittable sampling ([`dist`]),
//! - joint models with a conjugate Gamma-Exponential reference ([`model`]),
//! - lognormal and normal variational families with scores and a
//!   reparameterization path ([`varfam`]),
//! - Monte Carlo and closed-form ELBO values plus score-function and
//!   reparameterized gradient estimators ([`estimators`]),
//! - a plain gradient-ascent loop with trace recording ([`optimize`]),
//! - amortized inference with a small encoder network trained by manual
//!   backpropagation ([`amortize`]),
//! - quadrature and finite-difference oracles used to cross-check every
//!   analytic route ([`oracle`]).
//!
//! The numeric core is generic over the scalar type; [`Real`] is the `f64`
//! default used by the command-line tools.

pub mod amortize;
pub mod dist;
pub mod error;
pub mod estimators;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod rng;
pub mod special;
pub mod varfam;

pub use dist::{Distribution, Support};
pub use error::{Error, Result};
pub use model::{GammaExpModel, Model};
pub use rng::RngState;
pub use varfam::{FamilyKind, NoiseDraw, VariationalFamily, VariationalParams};

use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display};

/// Floating-point scalar the numeric core is generic over.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` constant into the scalar type.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Default scalar for the command-line tools and reference experiments.
pub type Real = f64;

/// Single-precision alias, exercised mainly by tests.
pub type Real32 = f32;
