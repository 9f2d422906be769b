//! Variational families q_theta(z): sampling, log-density, the score
//! gradient with respect to theta, the reparameterization path g_theta(eps),
//! and the support-compatibility gate between a family and a model.

use crate::dist::{Distribution, Support};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::{RngState, Sampler};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    Lognormal,
    Normal,
}

/// Location-scale variational parameters theta = (mu, sigma).
///
/// The scale is stored as log sigma so the optimizer can work in an
/// unconstrained vector; the (loc, log sigma) round trip is therefore exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariationalParams<F> {
    loc: F,
    log_scale: F,
}

impl<F: Scalar> VariationalParams<F> {
    pub fn new(loc: F, scale: F) -> Result<Self> {
        if !loc.is_finite() {
            return Err(Error::NonFinite {
                name: "loc",
                value: loc.as_f64(),
            });
        }
        if !scale.is_finite() || scale <= F::zero() {
            return Err(Error::InvalidParameter {
                name: "scale",
                reason: format!("must be finite and > 0, got {scale}"),
            });
        }
        Ok(Self {
            loc,
            log_scale: scale.ln(),
        })
    }

    /// Builds from the unconstrained vector (mu, log sigma).
    pub fn from_unconstrained(v: [F; 2]) -> Result<Self> {
        for (name, x) in [("loc", v[0]), ("log_scale", v[1])] {
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    name,
                    value: x.as_f64(),
                });
            }
        }
        Ok(Self {
            loc: v[0],
            log_scale: v[1],
        })
    }

    pub fn to_unconstrained(self) -> [F; 2] {
        [self.loc, self.log_scale]
    }

    pub fn loc(self) -> F {
        self.loc
    }

    pub fn scale(self) -> F {
        self.log_scale.exp()
    }

    pub fn log_scale(self) -> F {
        self.log_scale
    }
}

/// Converts a gradient reported in (mu, sigma) coordinates into the
/// unconstrained (mu, log sigma) frame used by the optimizer.
pub fn grad_to_unconstrained<F: Scalar>(params: VariationalParams<F>, grad: [F; 2]) -> [F; 2] {
    [grad[0], grad[1] * params.scale()]
}

/// One draw of the parameter-free base noise, eps ~ N(0, 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseDraw<F>(pub F);

impl<F: Scalar> NoiseDraw<F> {
    pub fn standard_normal(s: &mut Sampler) -> Self {
        NoiseDraw(F::of(s.standard_normal()))
    }
}

/// A two-parameter variational family over a scalar latent. Both kinds here
/// admit the location-scale reparameterization path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VariationalFamily {
    kind: FamilyKind,
}

impl VariationalFamily {
    pub fn new(kind: FamilyKind) -> Self {
        Self { kind }
    }

    pub fn lognormal() -> Self {
        Self::new(FamilyKind::Lognormal)
    }

    pub fn normal() -> Self {
        Self::new(FamilyKind::Normal)
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn support(&self) -> Support {
        match self.kind {
            FamilyKind::Lognormal => Support::PositiveReals,
            FamilyKind::Normal => Support::AllReals,
        }
    }

    pub fn reparameterizable(&self) -> bool {
        true
    }

    /// The member of the family at the given parameters.
    pub fn distribution<F: Scalar>(&self, params: VariationalParams<F>) -> Distribution<F> {
        match self.kind {
            FamilyKind::Lognormal => Distribution::Lognormal {
                logmean: params.loc(),
                logstddev: params.scale(),
            },
            FamilyKind::Normal => Distribution::Normal {
                mean: params.loc(),
                stddev: params.scale(),
            },
        }
    }

    /// log q_theta(z); same contract as [`Distribution::log_pdf`].
    pub fn log_density<F: Scalar>(&self, params: VariationalParams<F>, z: F) -> Result<F> {
        self.distribution(params).log_pdf(z)
    }

    /// Score: (d/dmu, d/dsigma) of log q_theta(z), in (mu, sigma) coordinates.
    ///
    /// For the normal family this is ((z-mu)/sigma^2, ((z-mu)^2/sigma^2 - 1)/sigma);
    /// the lognormal analog replaces z - mu with log z - mu.
    pub fn score<F: Scalar>(&self, params: VariationalParams<F>, z: F) -> Result<[F; 2]> {
        if !z.is_finite() {
            return Err(Error::NonFinite {
                name: "z",
                value: z.as_f64(),
            });
        }
        if !self.support().contains(z) {
            return Err(Error::OutsideSupport {
                value: z.as_f64(),
                support: self.support(),
            });
        }
        let sigma = params.scale();
        let d = match self.kind {
            FamilyKind::Lognormal => z.ln() - params.loc(),
            FamilyKind::Normal => z - params.loc(),
        };
        let s2 = sigma * sigma;
        Ok([d / s2, (d * d / s2 - F::one()) / sigma])
    }

    /// d/dz log q_theta(z).
    pub fn dlogq_dz<F: Scalar>(&self, params: VariationalParams<F>, z: F) -> Result<F> {
        if !z.is_finite() {
            return Err(Error::NonFinite {
                name: "z",
                value: z.as_f64(),
            });
        }
        if !self.support().contains(z) {
            return Err(Error::OutsideSupport {
                value: z.as_f64(),
                support: self.support(),
            });
        }
        let sigma = params.scale();
        Ok(match self.kind {
            FamilyKind::Normal => -(z - params.loc()) / (sigma * sigma),
            FamilyKind::Lognormal => {
                -(F::one() + (z.ln() - params.loc()) / (sigma * sigma)) / z
            }
        })
    }

    /// The path z = g_theta(eps): mu + sigma*eps for the normal family,
    /// exp(mu + sigma*eps) for the lognormal one.
    pub fn reparam_sample<F: Scalar>(&self, params: VariationalParams<F>, eps: NoiseDraw<F>) -> F {
        let linear = params.loc() + params.scale() * eps.0;
        match self.kind {
            FamilyKind::Normal => linear,
            FamilyKind::Lognormal => linear.exp(),
        }
    }

    /// (dz/dmu, dz/dsigma) of the path at fixed eps.
    pub fn reparam_jacobian<F: Scalar>(
        &self,
        params: VariationalParams<F>,
        eps: NoiseDraw<F>,
    ) -> [F; 2] {
        match self.kind {
            FamilyKind::Normal => [F::one(), eps.0],
            FamilyKind::Lognormal => {
                let z = self.reparam_sample(params, eps);
                [z, eps.0 * z]
            }
        }
    }

    /// One draw from q_theta through the reparameterization path, consuming
    /// exactly one base-noise value.
    pub fn draw<F: Scalar>(&self, params: VariationalParams<F>, s: &mut Sampler) -> F {
        self.reparam_sample(params, NoiseDraw::standard_normal(s))
    }

    pub fn sample<F: Scalar>(&self, params: VariationalParams<F>, rng: RngState, n: usize) -> Vec<F> {
        let mut s = rng.sampler();
        (0..n).map(|_| self.draw(params, &mut s)).collect()
    }
}

/// Configuration-time gate: ok iff the family's support is contained in the
/// model's latent support. The error value names both supports.
pub fn support_compatible<F: Scalar, M: Model<F> + ?Sized>(
    family: &VariationalFamily,
    model: &M,
) -> Result<()> {
    let q = family.support();
    let target = model.latent_support();
    if q.is_subset_of(target) {
        Ok(())
    } else {
        Err(Error::SupportMismatch { q, target })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GammaExpModel;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn log_density_frozen_values() {
        let f = VariationalFamily::lognormal();
        let p = VariationalParams::new(0.0_f64, 0.5).unwrap();
        assert_abs_diff_eq!(
            f.log_density(p, 1.0).unwrap(),
            -0.225_791_352_644_727_33,
            epsilon = 1e-13
        );
        assert_eq!(f.log_density(p, -1.0).unwrap(), f64::NEG_INFINITY);

        let f = VariationalFamily::normal();
        let p = VariationalParams::new(0.0_f64, 1.0).unwrap();
        assert_abs_diff_eq!(
            f.log_density(p, 0.0).unwrap(),
            -0.918_938_533_204_672_7,
            epsilon = 1e-13
        );
    }

    #[test]
    fn score_frozen_values() {
        let n = VariationalFamily::normal();
        let p = VariationalParams::new(0.0_f64, 0.5).unwrap();
        let s = n.score(p, 0.0).unwrap();
        assert_abs_diff_eq!(s[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[1], -2.0, epsilon = 1e-14);

        let ln = VariationalFamily::lognormal();
        let s = ln.score(p, 1.0).unwrap();
        assert_abs_diff_eq!(s[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[1], -2.0, epsilon = 1e-14);

        let p1 = VariationalParams::new(0.0_f64, 1.0).unwrap();
        let s = n.score(p1, 2.0).unwrap();
        assert_abs_diff_eq!(s[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn score_outside_support_is_an_error() {
        let ln = VariationalFamily::lognormal();
        let p = VariationalParams::new(0.0_f64, 0.5).unwrap();
        assert!(ln.score(p, -1.0).is_err());
        assert!(ln.score(p, f64::NAN).is_err());
    }

    #[test]
    fn reparam_path_frozen_values() {
        let n = VariationalFamily::normal();
        let pn = VariationalParams::new(1.5_f64, 2.0).unwrap();
        assert_abs_diff_eq!(n.reparam_sample(pn, NoiseDraw(0.0)), 1.5, epsilon = 1e-15);

        let ln = VariationalFamily::lognormal();
        let pl = VariationalParams::new(0.0_f64, 0.5).unwrap();
        assert_abs_diff_eq!(ln.reparam_sample(pl, NoiseDraw(0.0)), 1.0, epsilon = 1e-15);

        let j = n.reparam_jacobian(pn, NoiseDraw(0.7));
        assert_eq!(j, [1.0, 0.7]);
        let j = ln.reparam_jacobian(pl, NoiseDraw(0.0));
        assert_abs_diff_eq!(j[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j[1], 0.0, epsilon = 1e-15);
        let j = ln.reparam_jacobian(pl, NoiseDraw(1.0));
        assert_abs_diff_eq!(j[0], 0.5_f64.exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(j[1], 0.5_f64.exp(), epsilon = 1e-14);
    }

    #[test]
    fn support_gate() {
        let m = GammaExpModel::new(3.0_f64, 1.0, 1.0).unwrap();
        assert!(support_compatible(&VariationalFamily::lognormal(), &m).is_ok());
        let err = support_compatible(&VariationalFamily::normal(), &m).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(-inf, inf)"), "{msg}");
        assert!(msg.contains("(0, inf)"), "{msg}");
        assert!(
            msg.contains("q(z) needs to be zero whenever p(z|x) is zero"),
            "{msg}"
        );
    }

    #[test]
    fn rejects_bad_params() {
        assert!(VariationalParams::new(0.0_f64, 0.0).is_err());
        assert!(VariationalParams::new(0.0_f64, -1.0).is_err());
        assert!(VariationalParams::new(f64::NAN, 1.0).is_err());
        assert!(VariationalParams::from_unconstrained([0.0_f64, f64::INFINITY]).is_err());
    }

    proptest! {
        // The optimizer's view round-trips bit for bit.
        #[test]
        fn unconstrained_round_trip(mu in -50.0_f64..50.0, ls in -30.0_f64..30.0) {
            let p = VariationalParams::from_unconstrained([mu, ls]).unwrap();
            let v = p.to_unconstrained();
            prop_assert_eq!(v[0].to_bits(), mu.to_bits());
            prop_assert_eq!(v[1].to_bits(), ls.to_bits());
        }

        // The path output always lands in the family's support.
        #[test]
        fn reparam_stays_in_support(
            mu in -5.0_f64..5.0,
            ls in -3.0_f64..2.0,
            eps in -6.0_f64..6.0,
        ) {
            let p = VariationalParams::from_unconstrained([mu, ls]).unwrap();
            for f in [VariationalFamily::lognormal(), VariationalFamily::normal()] {
                let z = f.reparam_sample(p, NoiseDraw(eps));
                prop_assert!(f.support().contains(z));
            }
        }
    }
}
