//! Gradient ascent over variational parameters, with step-size scheduling,
//! smoothed-gradient convergence detection, and full trace recording.
//!
//! Iterates run in the unconstrained (mu, log sigma) coordinates; gradients
//! arrive from the estimators in (mu, sigma) coordinates and are converted
//! with the chain-rule factor sigma on the scale component.

use crate::error::{Error, Result};
use crate::estimators::{
    closed_form_grad, closed_form_value, elbo_mc, evidence_gap, grad_reparam,
    grad_score_function, ElboEstimate, EstimatorConfig, EstimatorKind, GradientEstimate,
};
use crate::model::GammaExpModel;
use crate::rng::RngState;
use crate::varfam::{grad_to_unconstrained, support_compatible, FamilyKind, VariationalFamily,
    VariationalParams};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    Constant,
    /// step_size / sqrt(k + 1) at step k.
    InverseSqrtDecay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradEstimator {
    ClosedForm,
    Reparameterized,
    ScoreFunction,
}

/// Ascent settings. `new` fills in the defaults: step size 0.05, at most
/// 5000 steps, tolerance 1e-6 on the smoothed gradient norm, 256 samples per
/// stochastic gradient, constant steps for the closed form and inverse-sqrt
/// decay for the Monte Carlo estimators (constant steps cannot settle under
/// gradient noise).
#[derive(Clone, Copy, Debug)]
pub struct OptConfig<F> {
    pub step_size: F,
    pub max_steps: usize,
    pub schedule: Schedule,
    pub tolerance: F,
    pub estimator: GradEstimator,
    pub samples_per_step: usize,
    pub rng: RngState,
    /// Exponential smoothing factor for the convergence test.
    pub smoothing: F,
}

impl<F: Scalar> OptConfig<F> {
    pub fn new(estimator: GradEstimator, rng: RngState) -> Self {
        let schedule = match estimator {
            GradEstimator::ClosedForm => Schedule::Constant,
            _ => Schedule::InverseSqrtDecay,
        };
        Self {
            step_size: F::of(0.05),
            max_steps: 5000,
            schedule,
            tolerance: F::of(1e-6),
            estimator,
            samples_per_step: 256,
            rng,
            smoothing: F::of(0.9),
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.step_size.is_finite() || self.step_size <= F::zero() {
            return Err(Error::InvalidParameter {
                name: "step_size",
                reason: format!("must be finite and > 0, got {}", self.step_size),
            });
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "max_steps",
                reason: "must be at least 1".to_string(),
            });
        }
        if self.samples_per_step == 0 {
            return Err(Error::InvalidParameter {
                name: "samples_per_step",
                reason: "must be at least 1".to_string(),
            });
        }
        if !self.tolerance.is_finite() || self.tolerance <= F::zero() {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                reason: format!("must be > 0, got {}", self.tolerance),
            });
        }
        Ok(())
    }

    fn step_at(&self, k: usize) -> F {
        match self.schedule {
            Schedule::Constant => self.step_size,
            Schedule::InverseSqrtDecay => self.step_size / F::of((k + 1) as f64).sqrt(),
        }
    }
}

/// One recorded ascent step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceStep<F> {
    pub step: usize,
    pub params: VariationalParams<F>,
    pub elbo: ElboEstimate<F>,
    pub grad: GradientEstimate<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    Converged { step: usize },
    MaxSteps,
    Failed { step: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptTrace<F> {
    pub steps: Vec<TraceStep<F>>,
    pub stop: StopReason,
}

impl<F> OptTrace<F> {
    pub fn converged(&self) -> bool {
        matches!(self.stop, StopReason::Converged { .. })
    }
}

fn evaluate<F: Scalar>(
    model: &GammaExpModel<F>,
    family: &VariationalFamily,
    params: VariationalParams<F>,
    cfg: &OptConfig<F>,
    step: usize,
) -> Result<(ElboEstimate<F>, GradientEstimate<F>)> {
    match cfg.estimator {
        GradEstimator::ClosedForm => Ok((
            ElboEstimate {
                value: closed_form_value(model, params),
                standard_error: F::zero(),
                samples: 0,
            },
            GradientEstimate {
                grad: closed_form_grad(model, params),
                standard_error: [F::zero(), F::zero()],
                samples: 0,
                kind: EstimatorKind::ClosedForm,
            },
        )),
        GradEstimator::Reparameterized | GradEstimator::ScoreFunction => {
            let ecfg = EstimatorConfig {
                samples: cfg.samples_per_step,
                rng: cfg.rng.block(step as u64),
                direct_score_term: true,
            };
            let elbo = elbo_mc(model, family, params, &ecfg)?;
            let grad = match cfg.estimator {
                GradEstimator::Reparameterized => grad_reparam(model, family, params, &ecfg)?,
                _ => grad_score_function(model, family, params, &ecfg)?,
            };
            Ok((elbo, grad))
        }
    }
}

/// Gradient ascent on the ELBO: theta_{k+1} = theta_k + eta_k * grad, in the
/// unconstrained coordinates. Stops when the exponentially smoothed gradient
/// norm falls below the tolerance or after `max_steps` steps; a non-finite
/// or failed gradient halts the run with the partial trace intact.
pub fn ascend<F: Scalar>(
    model: &GammaExpModel<F>,
    family: &VariationalFamily,
    start: VariationalParams<F>,
    cfg: &OptConfig<F>,
) -> Result<(VariationalParams<F>, OptTrace<F>)> {
    cfg.validate()?;
    support_compatible(family, model)?;
    if cfg.estimator == GradEstimator::ClosedForm && family.kind() != FamilyKind::Lognormal {
        return Err(Error::InvalidParameter {
            name: "estimator",
            reason: "the closed-form gradient requires the lognormal family".to_string(),
        });
    }

    let mut params = start;
    let mut steps = Vec::new();
    let mut smoothed: Option<F> = None;
    for k in 0..=cfg.max_steps {
        let (elbo, grad) = match evaluate(model, family, params, cfg, k) {
            Ok(pair) => pair,
            Err(e) => {
                return Ok((
                    params,
                    OptTrace {
                        steps,
                        stop: StopReason::Failed {
                            step: k,
                            reason: e.to_string(),
                        },
                    },
                ))
            }
        };
        let unconstrained = grad_to_unconstrained(params, grad.grad);
        let norm = (unconstrained[0] * unconstrained[0]
            + unconstrained[1] * unconstrained[1])
            .sqrt();
        steps.push(TraceStep {
            step: k,
            params,
            elbo,
            grad,
        });
        if !norm.is_finite() {
            return Ok((
                params,
                OptTrace {
                    steps,
                    stop: StopReason::Failed {
                        step: k,
                        reason: "non-finite gradient".to_string(),
                    },
                },
            ));
        }
        smoothed = Some(match smoothed {
            None => norm,
            Some(s) => cfg.smoothing * s + (F::one() - cfg.smoothing) * norm,
        });
        if smoothed.unwrap() < cfg.tolerance {
            return Ok((
                params,
                OptTrace {
                    steps,
                    stop: StopReason::Converged { step: k },
                },
            ));
        }
        if k == cfg.max_steps {
            break;
        }
        let eta = cfg.step_at(k);
        let v = params.to_unconstrained();
        params = VariationalParams::from_unconstrained([
            v[0] + eta * unconstrained[0],
            v[1] + eta * unconstrained[1],
        ])?;
    }
    Ok((
        params,
        OptTrace {
            steps,
            stop: StopReason::MaxSteps,
        },
    ))
}

/// The ELBO-versus-mu curve at fixed sigma: one evidence-decomposition
/// triple per grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint<F> {
    pub mu: F,
    pub elbo: F,
    pub kl: F,
    pub log_evidence: F,
}

pub fn elbo_curve<F: Scalar>(
    model: &GammaExpModel<F>,
    family: &VariationalFamily,
    sigma: F,
    mu_grid: &[F],
) -> Result<Vec<CurvePoint<F>>> {
    let mut out = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        let params = VariationalParams::new(mu, sigma)?;
        let gap = evidence_gap(model, family, params)?;
        out.push(CurvePoint {
            mu,
            elbo: gap.elbo,
            kl: gap.kl,
            log_evidence: gap.log_evidence,
        });
    }
    Ok(out)
}
