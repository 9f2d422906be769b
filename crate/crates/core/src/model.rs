//! Joint probabilistic models p(x, z) over a scalar latent, and the
//! conjugate Gamma-Exponential instance with analytic posterior and evidence.

use crate::dist::{Distribution, Support};
use crate::error::{Error, Result};
use crate::special::ln_gamma;
use crate::Scalar;

/// A joint model seen through its log density, the z-gradient of that
/// density, and the latent support. Estimators treat models as black boxes
/// through this interface.
pub trait Model<F: Scalar> {
    /// log p(x, z); negative infinity for z outside the latent support,
    /// an error for non-finite z.
    fn log_joint(&self, z: F) -> Result<F>;

    /// d/dz log p(x, z) at an interior point of the support.
    fn log_joint_grad_z(&self, z: F) -> Result<F>;

    fn latent_support(&self) -> Support;
}

/// Exponential likelihood with a Gamma(shape, rate) prior on its rate
/// parameter, observed once. The posterior is Gamma(shape + 1, rate + x).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaExpModel<F> {
    shape: F,
    rate: F,
    observation: F,
}

impl<F: Scalar> GammaExpModel<F> {
    /// The observation is allowed to be zero (an Exponential draw can sit at
    /// the boundary in data files); shape and rate must be positive.
    pub fn new(shape: F, rate: F, observation: F) -> Result<Self> {
        for (name, v) in [("shape", shape), ("rate", rate)] {
            if !v.is_finite() || v <= F::zero() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        if !observation.is_finite() || observation < F::zero() {
            return Err(Error::InvalidParameter {
                name: "observation",
                reason: format!("must be finite and >= 0, got {observation}"),
            });
        }
        Ok(Self {
            shape,
            rate,
            observation,
        })
    }

    pub fn shape(&self) -> F {
        self.shape
    }

    pub fn rate(&self) -> F {
        self.rate
    }

    pub fn observation(&self) -> F {
        self.observation
    }

    /// Conjugate posterior Gamma(shape + 1, rate + x).
    pub fn analytic_posterior(&self) -> Distribution<F> {
        Distribution::Gamma {
            shape: self.shape + F::one(),
            rate: self.rate + self.observation,
        }
    }

    /// log p(x) = log(shape) + shape*log(rate) - (shape+1)*log(rate + x).
    pub fn log_evidence(&self) -> F {
        self.shape.ln() + self.shape * self.rate.ln()
            - (self.shape + F::one()) * (self.rate + self.observation).ln()
    }
}

impl<F: Scalar> Model<F> for GammaExpModel<F> {
    fn log_joint(&self, z: F) -> Result<F> {
        if !z.is_finite() {
            return Err(Error::NonFinite {
                name: "z",
                value: z.as_f64(),
            });
        }
        if z <= F::zero() {
            return Ok(F::neg_infinity());
        }
        // log p(x | z) = log z - z x, log p(z) is the Gamma prior density
        let log_lik = z.ln() - z * self.observation;
        let log_prior = self.shape * self.rate.ln() - ln_gamma(self.shape)
            + (self.shape - F::one()) * z.ln()
            - self.rate * z;
        Ok(log_lik + log_prior)
    }

    fn log_joint_grad_z(&self, z: F) -> Result<F> {
        if !z.is_finite() {
            return Err(Error::NonFinite {
                name: "z",
                value: z.as_f64(),
            });
        }
        if z <= F::zero() {
            return Err(Error::OutsideSupport {
                value: z.as_f64(),
                support: Support::PositiveReals,
            });
        }
        Ok(self.shape / z - (self.observation + self.rate))
    }

    fn latent_support(&self) -> Support {
        Support::PositiveReals
    }
}
