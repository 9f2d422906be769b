//! ELBO values and ELBO gradients.
//!
//! Three gradient routes are implemented against the same model interface:
//! the score-function (REINFORCE) estimator, the pathwise reparameterized
//! estimator, and the closed form available for the Gamma-Exponential model
//! paired with a lognormal family. Every Monte Carlo output carries a
//! per-component standard error so tolerances can be stated in SE units, and
//! sample `i` always draws from substream `(seed, i)` with the reduction in
//! index order, so results are reproducible and independent of evaluation
//! order.

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::model::{GammaExpModel, Model};
use crate::oracle::{quad_kl, QuadratureSpec};
use crate::rng::RngState;
use crate::special::ln_gamma;
use crate::varfam::{support_compatible, NoiseDraw, VariationalFamily, VariationalParams};
use crate::Scalar;

/// Monte Carlo settings shared by the stochastic estimators.
#[derive(Clone, Copy, Debug)]
pub struct EstimatorConfig {
    /// Number of Monte Carlo samples L.
    pub samples: usize,
    pub rng: RngState,
    /// Keep the direct parameter dependence of log q (the per-sample score
    /// term) in the reparameterized estimator. Its expectation is zero, so
    /// dropping it changes only the variance; the default keeps it.
    pub direct_score_term: bool,
}

impl EstimatorConfig {
    pub fn new(samples: usize, rng: RngState) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidParameter {
                name: "samples",
                reason: "must be at least 1".to_string(),
            });
        }
        Ok(Self {
            samples,
            rng,
            direct_score_term: true,
        })
    }

    pub fn without_direct_score_term(mut self) -> Self {
        self.direct_score_term = false;
        self
    }
}

/// A Monte Carlo ELBO value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElboEstimate<F> {
    pub value: F,
    /// Sample standard deviation of the summands divided by sqrt(L);
    /// zero when L = 1 or the value is analytic.
    pub standard_error: F,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    ScoreFunction,
    Reparameterized,
    ClosedForm,
}

/// A gradient in (mu, sigma) coordinates with per-component standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientEstimate<F> {
    pub grad: [F; 2],
    pub standard_error: [F; 2],
    pub samples: usize,
    pub kind: EstimatorKind,
}

fn mean_and_se<F: Scalar>(values: &[F]) -> (F, F) {
    let n = F::of(values.len() as f64);
    let mean = values.iter().fold(F::zero(), |a, &b| a + b) / n;
    if values.len() < 2 {
        return (mean, F::zero());
    }
    let ss = values
        .iter()
        .fold(F::zero(), |a, &b| a + (b - mean) * (b - mean));
    let sd = (ss / (n - F::one())).sqrt();
    (mean, sd / n.sqrt())
}

fn vector_mean_and_se<F: Scalar>(terms: &[[F; 2]]) -> ([F; 2], [F; 2]) {
    let col: Vec<F> = terms.iter().map(|t| t[0]).collect();
    let (m0, s0) = mean_and_se(&col);
    let col: Vec<F> = terms.iter().map(|t| t[1]).collect();
    let (m1, s1) = mean_and_se(&col);
    ([m0, m1], [s0, s1])
}

/// Monte Carlo ELBO: the mean over L draws z ~ q_theta of
/// log p(x, z) - log q_theta(z).
///
/// Incompatible supports are rejected before any sampling; a non-finite
/// summand is reported as a failure naming the offending draw.
pub fn elbo_mc<F: Scalar, M: Model<F> + ?Sized>(
    model: &M,
    family: &VariationalFamily,
    params: VariationalParams<F>,
    cfg: &EstimatorConfig,
) -> Result<ElboEstimate<F>> {
    support_compatible(family, model)?;
    let mut terms = Vec::with_capacity(cfg.samples);
    for i in 0..cfg.samples {
        let mut s = cfg.rng.substream(i as u64).sampler();
        let z = family.draw(params, &mut s);
        let summand = model.log_joint(z)? - family.log_density(params, z)?;
        if !summand.is_finite() {
            return Err(Error::NonFiniteSummand {
                index: i,
                z: z.as_f64(),
            });
        }
        terms.push(summand);
    }
    let (value, standard_error) = mean_and_se(&terms);
    Ok(ElboEstimate {
        value,
        standard_error,
        samples: cfg.samples,
    })
}

/// Closed-form ELBO for the Gamma-Exponential model with a Lognormal(mu,
/// sigma^2) variational posterior:
///
/// log(rate^shape sqrt(2 pi) / Gamma(shape)) + (shape + 1) mu
///   - (rate + x) exp(mu + sigma^2/2) + log sigma + 1/2.
pub fn elbo_closed_form<F: Scalar>(shape: F, rate: F, obs: F, mu: F, sigma: F) -> Result<F> {
    let model = GammaExpModel::new(shape, rate, obs)?;
    let params = VariationalParams::new(mu, sigma)?;
    Ok(closed_form_value(&model, params))
}

/// Gradient of [`elbo_closed_form`] in (mu, sigma) coordinates:
/// d/dmu = (shape + 1) - (rate + x) exp(mu + sigma^2/2),
/// d/dsigma = -(rate + x) sigma exp(mu + sigma^2/2) + 1/sigma.
pub fn elbo_closed_form_grad<F: Scalar>(
    shape: F,
    rate: F,
    obs: F,
    mu: F,
    sigma: F,
) -> Result<[F; 2]> {
    let model = GammaExpModel::new(shape, rate, obs)?;
    let params = VariationalParams::new(mu, sigma)?;
    Ok(closed_form_grad(&model, params))
}

pub(crate) fn closed_form_value<F: Scalar>(
    model: &GammaExpModel<F>,
    params: VariationalParams<F>,
) -> F {
    let half = F::of(0.5);
    let two_pi = F::of(2.0) * F::of(std::f64::consts::PI);
    let (shape, rate, obs) = (model.shape(), model.rate(), model.observation());
    let (mu, sigma) = (params.loc(), params.scale());
    shape * rate.ln() + half * two_pi.ln() - ln_gamma(shape) + (shape + F::one()) * mu
        - (rate + obs) * (mu + half * sigma * sigma).exp()
        + sigma.ln()
        + half
}

pub(crate) fn closed_form_grad<F: Scalar>(
    model: &GammaExpModel<F>,
    params: VariationalParams<F>,
) -> [F; 2] {
    let half = F::of(0.5);
    let (shape, rate, obs) = (model.shape(), model.rate(), model.observation());
    let (mu, sigma) = (params.loc(), params.scale());
    let growth = (rate + obs) * (mu + half * sigma * sigma).exp();
    [
        shape + F::one() - growth,
        -growth * sigma + F::one() / sigma,
    ]
}

/// Score-function (REINFORCE) gradient estimator: the mean over L draws of
/// (log p(x, z) - log q(z)) * score(z).
pub fn grad_score_function<F: Scalar, M: Model<F> + ?Sized>(
    model: &M,
    family: &VariationalFamily,
    params: VariationalParams<F>,
    cfg: &EstimatorConfig,
) -> Result<GradientEstimate<F>> {
    support_compatible(family, model)?;
    let mut terms = Vec::with_capacity(cfg.samples);
    for i in 0..cfg.samples {
        let mut s = cfg.rng.substream(i as u64).sampler();
        let z = family.draw(params, &mut s);
        let weight = model.log_joint(z)? - family.log_density(params, z)?;
        if !weight.is_finite() {
            return Err(Error::NonFiniteSummand {
                index: i,
                z: z.as_f64(),
            });
        }
        let score = family.score(params, z)?;
        terms.push([weight * score[0], weight * score[1]]);
    }
    let (grad, standard_error) = vector_mean_and_se(&terms);
    Ok(GradientEstimate {
        grad,
        standard_error,
        samples: cfg.samples,
        kind: EstimatorKind::ScoreFunction,
    })
}

/// Pathwise (reparameterized) gradient estimator. With z = g_theta(eps) the
/// per-sample term is
///
/// (d/dz log p(x, z) - d/dz log q(z)) * (dz/dtheta) - score(z),
///
/// where the trailing score term is the direct theta-dependence of log q; it
/// has zero expectation and can be dropped through the configuration flag.
pub fn grad_reparam<F: Scalar, M: Model<F> + ?Sized>(
    model: &M,
    family: &VariationalFamily,
    params: VariationalParams<F>,
    cfg: &EstimatorConfig,
) -> Result<GradientEstimate<F>> {
    if !family.reparameterizable() {
        return Err(Error::NotReparameterizable {
            family: match family.kind() {
                crate::varfam::FamilyKind::Lognormal => "lognormal",
                crate::varfam::FamilyKind::Normal => "normal",
            },
        });
    }
    support_compatible(family, model)?;
    let mut terms = Vec::with_capacity(cfg.samples);
    for i in 0..cfg.samples {
        let mut s = cfg.rng.substream(i as u64).sampler();
        let eps = NoiseDraw::standard_normal(&mut s);
        let z = family.reparam_sample(params, eps);
        let slope = model.log_joint_grad_z(z)? - family.dlogq_dz(params, z)?;
        let jac = family.reparam_jacobian(params, eps);
        let mut term = [slope * jac[0], slope * jac[1]];
        if cfg.direct_score_term {
            let score = family.score(params, z)?;
            term = [term[0] - score[0], term[1] - score[1]];
        }
        if !term[0].is_finite() || !term[1].is_finite() {
            return Err(Error::NonFiniteSummand {
                index: i,
                z: z.as_f64(),
            });
        }
        terms.push(term);
    }
    let (grad, standard_error) = vector_mean_and_se(&terms);
    Ok(GradientEstimate {
        grad,
        standard_error,
        samples: cfg.samples,
        kind: EstimatorKind::Reparameterized,
    })
}

/// Pathwise gradient of E_q[f(z)] for a general integrand: the mean over L
/// noise draws of f'(g_theta(eps)) * (dz/dtheta). `integrand_slope` is f'.
pub fn grad_reparam_expectation<F: Scalar>(
    integrand_slope: impl Fn(F) -> F,
    family: &VariationalFamily,
    params: VariationalParams<F>,
    cfg: &EstimatorConfig,
) -> Result<GradientEstimate<F>> {
    if !family.reparameterizable() {
        return Err(Error::NotReparameterizable { family: "family" });
    }
    let mut terms = Vec::with_capacity(cfg.samples);
    for i in 0..cfg.samples {
        let mut s = cfg.rng.substream(i as u64).sampler();
        let eps = NoiseDraw::standard_normal(&mut s);
        let z = family.reparam_sample(params, eps);
        let slope = integrand_slope(z);
        let jac = family.reparam_jacobian(params, eps);
        let term = [slope * jac[0], slope * jac[1]];
        if !term[0].is_finite() || !term[1].is_finite() {
            return Err(Error::NonFiniteSummand {
                index: i,
                z: z.as_f64(),
            });
        }
        terms.push(term);
    }
    let (grad, standard_error) = vector_mean_and_se(&terms);
    Ok(GradientEstimate {
        grad,
        standard_error,
        samples: cfg.samples,
        kind: EstimatorKind::Reparameterized,
    })
}

/// The evidence decomposition at one parameter setting: closed-form ELBO,
/// quadrature KL against the analytic posterior, and the log evidence. The
/// three satisfy elbo + kl = log_evidence up to quadrature error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvidenceGap<F> {
    pub elbo: F,
    pub kl: F,
    pub log_evidence: F,
}

pub fn evidence_gap<F: Scalar>(
    model: &GammaExpModel<F>,
    family: &VariationalFamily,
    params: VariationalParams<F>,
) -> Result<EvidenceGap<F>> {
    support_compatible(family, model)?;
    let q: Distribution<F> = family.distribution(params);
    let kl = quad_kl(&q, &model.analytic_posterior(), &QuadratureSpec::default())?;
    Ok(EvidenceGap {
        elbo: closed_form_value(model, params),
        kl,
        log_evidence: model.log_evidence(),
    })
}
