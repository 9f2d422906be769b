//! Elementary univariate densities: Exponential, Gamma, Normal, and
//! Lognormal, with log-pdf evaluation, deterministic sampling, moments, CDFs,
//! and support metadata.

use std::fmt;

use crate::error::{Error, Result};
use crate::rng::{RngState, Sampler};
use crate::special::{ln_gamma, reg_lower_gamma, standard_normal_cdf};
use crate::Scalar;

/// Support of a univariate density.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    /// The open half line (0, inf).
    PositiveReals,
    /// The whole real line.
    AllReals,
}

impl Support {
    pub fn contains<F: Scalar>(self, v: F) -> bool {
        match self {
            Support::PositiveReals => v > F::zero(),
            Support::AllReals => true,
        }
    }

    /// Whether every point of `self` lies inside `other`.
    pub fn is_subset_of(self, other: Support) -> bool {
        !matches!((self, other), (Support::AllReals, Support::PositiveReals))
    }
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Support::PositiveReals => write!(f, "(0, inf)"),
            Support::AllReals => write!(f, "(-inf, inf)"),
        }
    }
}

/// Tagged parameter record for the four densities used by the crate.
///
/// All scale, shape, rate, and stddev parameters are strictly positive;
/// construction rejects anything else.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Distribution<F> {
    Exponential { rate: F },
    Gamma { shape: F, rate: F },
    Normal { mean: F, stddev: F },
    Lognormal { logmean: F, logstddev: F },
}

fn require_positive<F: Scalar>(name: &'static str, v: F) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite {
            name,
            value: v.as_f64(),
        });
    }
    if v <= F::zero() {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be > 0, got {v}"),
        });
    }
    Ok(())
}

fn require_finite<F: Scalar>(name: &'static str, v: F) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite {
            name,
            value: v.as_f64(),
        });
    }
    Ok(())
}

impl<F: Scalar> Distribution<F> {
    pub fn exponential(rate: F) -> Result<Self> {
        require_positive("rate", rate)?;
        Ok(Distribution::Exponential { rate })
    }

    pub fn gamma(shape: F, rate: F) -> Result<Self> {
        require_positive("shape", shape)?;
        require_positive("rate", rate)?;
        Ok(Distribution::Gamma { shape, rate })
    }

    pub fn normal(mean: F, stddev: F) -> Result<Self> {
        require_finite("mean", mean)?;
        require_positive("stddev", stddev)?;
        Ok(Distribution::Normal { mean, stddev })
    }

    pub fn lognormal(logmean: F, logstddev: F) -> Result<Self> {
        require_finite("logmean", logmean)?;
        require_positive("logstddev", logstddev)?;
        Ok(Distribution::Lognormal { logmean, logstddev })
    }

    pub fn support(&self) -> Support {
        match self {
            Distribution::Normal { .. } => Support::AllReals,
            _ => Support::PositiveReals,
        }
    }

    /// Natural-log density at `v`.
    ///
    /// Returns negative infinity (not an error) outside the support, so
    /// downstream expectation machinery can detect support violations
    /// numerically. Non-finite `v` is an error.
    pub fn log_pdf(&self, v: F) -> Result<F> {
        require_finite("v", v)?;
        if !self.support().contains(v) {
            return Ok(F::neg_infinity());
        }
        let half = F::of(0.5);
        let ln_2pi = (F::of(2.0) * F::of(std::f64::consts::PI)).ln();
        Ok(match *self {
            Distribution::Exponential { rate } => rate.ln() - rate * v,
            Distribution::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + (shape - F::one()) * v.ln() - rate * v
            }
            Distribution::Normal { mean, stddev } => {
                let z = (v - mean) / stddev;
                -half * z * z - stddev.ln() - half * ln_2pi
            }
            Distribution::Lognormal { logmean, logstddev } => {
                let lv = v.ln();
                let z = (lv - logmean) / logstddev;
                -half * z * z - logstddev.ln() - half * ln_2pi - lv
            }
        })
    }

    /// Analytic mean.
    pub fn mean(&self) -> F {
        match *self {
            Distribution::Exponential { rate } => F::one() / rate,
            Distribution::Gamma { shape, rate } => shape / rate,
            Distribution::Normal { mean, .. } => mean,
            Distribution::Lognormal { logmean, logstddev } => {
                (logmean + F::of(0.5) * logstddev * logstddev).exp()
            }
        }
    }

    /// Analytic CDF at `v`.
    pub fn cdf(&self, v: F) -> F {
        match *self {
            Distribution::Exponential { rate } => {
                if v <= F::zero() {
                    F::zero()
                } else {
                    F::one() - (-rate * v).exp()
                }
            }
            Distribution::Gamma { shape, rate } => {
                if v <= F::zero() {
                    F::zero()
                } else {
                    reg_lower_gamma(shape, rate * v)
                }
            }
            Distribution::Normal { mean, stddev } => standard_normal_cdf((v - mean) / stddev),
            Distribution::Lognormal { logmean, logstddev } => {
                if v <= F::zero() {
                    F::zero()
                } else {
                    standard_normal_cdf((v.ln() - logmean) / logstddev)
                }
            }
        }
    }

    /// Draws `n` i.i.d. values; deterministic given `rng`.
    pub fn sample(&self, rng: RngState, n: usize) -> Vec<F> {
        let mut s = rng.sampler();
        (0..n).map(|_| self.draw(&mut s)).collect()
    }

    /// Draws one value from the given sampler.
    pub fn draw(&self, s: &mut Sampler) -> F {
        match *self {
            Distribution::Exponential { rate } => F::of(s.standard_exponential()) / rate,
            Distribution::Gamma { shape, rate } => F::of(draw_gamma(s, shape.as_f64())) / rate,
            Distribution::Normal { mean, stddev } => mean + stddev * F::of(s.standard_normal()),
            Distribution::Lognormal { logmean, logstddev } => {
                (logmean + logstddev * F::of(s.standard_normal())).exp()
            }
        }
    }
}

/// Gamma(shape, 1) sampler: Marsaglia-Tsang squeeze method for shape >= 1,
/// with the boost Gamma(a) = Gamma(a + 1) * U^(1/a) below one. Draw order is
/// fixed (normal, then uniform per proposal), so sequences are reproducible.
fn draw_gamma(s: &mut Sampler, shape: f64) -> f64 {
    if shape < 1.0 {
        let g = draw_gamma(s, shape + 1.0);
        return g * s.uniform_oo().powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = s.standard_normal();
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = s.uniform_oo();
        if u < 1.0 - 0.0331 * x * x * x * x {
            return d * v;
        }
        if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}
