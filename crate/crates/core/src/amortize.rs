//! Amortized variational inference on a factorized Gamma-Exponential
//! dataset model.
//!
//! An encoder network maps each observation x_i to the local variational
//! parameters (mu_i, log sigma_i) of a lognormal posterior over its latent
//! rate. Training minimizes the negated sum of per-point Monte Carlo ELBOs
//! with reparameterized per-point gradients pushed through the encoder by
//! manual backpropagation. Noise draws are frozen per (data point, sample)
//! within a gradient evaluation, so finite-difference checks of the encoder
//! gradient are exact.

use crate::error::{Error, Result};
use crate::model::{GammaExpModel, Model};
use crate::rng::RngState;
use crate::varfam::{NoiseDraw, VariationalFamily, VariationalParams};
use crate::Scalar;

/// Positive observations, one latent rate each.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<F> {
    values: Vec<F>,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(values: Vec<F>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter {
                name: "dataset",
                reason: "must contain at least one observation".to_string(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= F::zero() {
                return Err(Error::Dataset {
                    line: i + 1,
                    reason: format!("observation must be a positive finite number, got {v}"),
                });
            }
        }
        Ok(Self { values })
    }

    /// Parses the one-observation-per-line text format. Blank lines are
    /// skipped; anything else must be a positive decimal. Errors carry the
    /// 1-based line number.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| Error::Dataset {
                line: i + 1,
                reason: format!("expected a decimal number, got {line:?}"),
            })?;
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Dataset {
                    line: i + 1,
                    reason: format!("observation must be positive, got {line}"),
                });
            }
            values.push(F::of(v));
        }
        Self::new(values)
    }

    /// Draws a synthetic dataset from the generative model: a rate from the
    /// Gamma(shape, rate) prior per point, then an exponential observation.
    /// Zero draws are rejected so every observation is strictly positive.
    pub fn generate(n: usize, shape: F, rate: F, rng: RngState) -> Result<Self> {
        use crate::dist::Distribution;
        let prior = Distribution::gamma(shape, rate)?;
        let mut s = rng.sampler();
        let mut values = Vec::with_capacity(n);
        while values.len() < n {
            let lambda: F = prior.draw(&mut s);
            let x = F::of(s.standard_exponential()) / lambda;
            if x > F::zero() {
                values.push(x);
            }
        }
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }
}

/// One-hidden-layer tanh network, scalar input, two outputs (mu, log sigma).
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder<F> {
    hidden_w: Vec<F>,
    hidden_b: Vec<F>,
    out_w_loc: Vec<F>,
    out_w_log_scale: Vec<F>,
    out_b: [F; 2],
}

impl<F: Scalar> Encoder<F> {
    /// Hidden weights and biases start uniform in +-1/sqrt(fan-in); the
    /// output layer starts at zero, so every input initially maps to
    /// (mu, sigma) = (0, 1).
    pub fn init(hidden: usize, rng: RngState) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::InvalidParameter {
                name: "hidden",
                reason: "must be at least 1".to_string(),
            });
        }
        let mut s = rng.sampler();
        let mut uniform = |bound: f64| F::of(bound * (2.0 * s.uniform_oo() - 1.0));
        let hidden_w = (0..hidden).map(|_| uniform(1.0)).collect();
        let hidden_b = (0..hidden).map(|_| uniform(1.0)).collect();
        Ok(Self {
            hidden_w,
            hidden_b,
            out_w_loc: vec![F::zero(); hidden],
            out_w_log_scale: vec![F::zero(); hidden],
            out_b: [F::zero(), F::zero()],
        })
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden_w.len()
    }

    pub fn param_count(&self) -> usize {
        4 * self.hidden_width() + 2
    }

    /// Flat parameter layout: hidden weights, hidden biases, output weights
    /// for mu, output weights for log sigma, the two output biases.
    pub fn to_flat(&self) -> Vec<F> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&self.hidden_w);
        v.extend_from_slice(&self.hidden_b);
        v.extend_from_slice(&self.out_w_loc);
        v.extend_from_slice(&self.out_w_log_scale);
        v.extend_from_slice(&self.out_b);
        v
    }

    pub fn from_flat(hidden: usize, flat: &[F]) -> Result<Self> {
        if flat.len() != 4 * hidden + 2 {
            return Err(Error::InvalidParameter {
                name: "flat",
                reason: format!("expected {} parameters, got {}", 4 * hidden + 2, flat.len()),
            });
        }
        let h = hidden;
        Ok(Self {
            hidden_w: flat[0..h].to_vec(),
            hidden_b: flat[h..2 * h].to_vec(),
            out_w_loc: flat[2 * h..3 * h].to_vec(),
            out_w_log_scale: flat[3 * h..4 * h].to_vec(),
            out_b: [flat[4 * h], flat[4 * h + 1]],
        })
    }

    fn forward_hidden(&self, x: F) -> Result<(Vec<F>, VariationalParams<F>)> {
        let h: Vec<F> = self
            .hidden_w
            .iter()
            .zip(&self.hidden_b)
            .map(|(&w, &b)| (w * x + b).tanh())
            .collect();
        let mut loc = self.out_b[0];
        let mut log_scale = self.out_b[1];
        for (j, &hj) in h.iter().enumerate() {
            loc = loc + self.out_w_loc[j] * hj;
            log_scale = log_scale + self.out_w_log_scale[j] * hj;
        }
        let params = VariationalParams::from_unconstrained([loc, log_scale])?;
        Ok((h, params))
    }

    /// Local variational parameters for one observation; sigma is positive
    /// by construction since the second output is log sigma.
    pub fn forward(&self, x: F) -> Result<VariationalParams<F>> {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                name: "x",
                value: x.as_f64(),
            });
        }
        Ok(self.forward_hidden(x)?.1)
    }
}

/// Training settings for [`train_amortized`].
#[derive(Clone, Copy, Debug)]
pub struct AmortizeConfig<F> {
    pub hidden: usize,
    pub batch_size: usize,
    /// Monte Carlo samples per local ELBO.
    pub samples: usize,
    pub epochs: usize,
    pub step_size: F,
    pub rng: RngState,
}

impl<F: Scalar> AmortizeConfig<F> {
    pub fn new(rng: RngState) -> Self {
        Self {
            hidden: 16,
            batch_size: 5,
            samples: 32,
            epochs: 50,
            step_size: F::of(0.15),
            rng,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::InvalidParameter {
                name: "hidden",
                reason: "must be at least 1".to_string(),
            });
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::InvalidParameter {
                name: "batch_size",
                reason: format!("must be in 1..={n}, got {}", self.batch_size),
            });
        }
        if self.samples == 0 || self.epochs == 0 {
            return Err(Error::InvalidParameter {
                name: "samples/epochs",
                reason: "must be at least 1".to_string(),
            });
        }
        if !self.step_size.is_finite() || self.step_size <= F::zero() {
            return Err(Error::InvalidParameter {
                name: "step_size",
                reason: format!("must be finite and > 0, got {}", self.step_size),
            });
        }
        Ok(())
    }
}

/// Negated sum of per-point Monte Carlo ELBOs over `batch`, and its exact
/// gradient with respect to the flat encoder parameters under frozen noise.
///
/// Data point `i` always draws from the rng block `i` regardless of batch
/// composition, so the full-dataset objective equals the sum of single-point
/// objectives evaluated with the same configuration, exactly.
pub fn local_elbo_objective<F: Scalar>(
    data: &Dataset<F>,
    encoder: &Encoder<F>,
    shape: F,
    rate: F,
    batch: &[usize],
    cfg: &AmortizeConfig<F>,
) -> Result<(F, Vec<F>)> {
    let family = VariationalFamily::lognormal();
    let l = F::of(cfg.samples as f64);
    let mut loss = F::zero();
    let mut grad = vec![F::zero(); encoder.param_count()];
    let h = encoder.hidden_width();
    for &i in batch {
        if i >= data.len() {
            return Err(Error::InvalidParameter {
                name: "batch",
                reason: format!("index {i} out of range for {} points", data.len()),
            });
        }
        let x = data.values()[i];
        let point = GammaExpModel::new(shape, rate, x)?;
        let (hidden, params) = encoder.forward_hidden(x)?;

        // reparameterized per-point ELBO and its (mu, sigma) gradient
        let mut elbo = F::zero();
        let mut g_mu = F::zero();
        let mut g_sigma = F::zero();
        let base = cfg.rng.block(i as u64);
        for s_idx in 0..cfg.samples {
            let mut s = base.substream(s_idx as u64).sampler();
            let eps = NoiseDraw::standard_normal(&mut s);
            let z = family.reparam_sample(params, eps);
            let value = point.log_joint(z)? - family.log_density(params, z)?;
            if !value.is_finite() {
                return Err(Error::NonFiniteLocalTerm { index: i });
            }
            let slope = point.log_joint_grad_z(z)? - family.dlogq_dz(params, z)?;
            let jac = family.reparam_jacobian(params, eps);
            let score = family.score(params, z)?;
            elbo = elbo + value / l;
            g_mu = g_mu + (slope * jac[0] - score[0]) / l;
            g_sigma = g_sigma + (slope * jac[1] - score[1]) / l;
        }
        if !elbo.is_finite() || !g_mu.is_finite() || !g_sigma.is_finite() {
            return Err(Error::NonFiniteLocalTerm { index: i });
        }
        loss = loss - elbo;

        // chain to the encoder outputs: loss is -elbo, the second output is
        // log sigma
        let d_loc = -g_mu;
        let d_log_scale = -g_sigma * params.scale();
        for j in 0..h {
            let hj = hidden[j];
            grad[2 * h + j] = grad[2 * h + j] + d_loc * hj;
            grad[3 * h + j] = grad[3 * h + j] + d_log_scale * hj;
            let d_h = d_loc * encoder.out_w_loc[j] + d_log_scale * encoder.out_w_log_scale[j];
            let d_pre = d_h * (F::one() - hj * hj);
            grad[j] = grad[j] + d_pre * x;
            grad[h + j] = grad[h + j] + d_pre;
        }
        grad[4 * h] = grad[4 * h] + d_loc;
        grad[4 * h + 1] = grad[4 * h + 1] + d_log_scale;
    }
    Ok((loss, grad))
}

/// The analytic per-point optimum of the local ELBO:
/// sigma* = 1/sqrt(shape + 1), mu* = log((shape + 1)/(rate + x)) - sigma*^2/2.
pub fn per_point_optimum<F: Scalar>(shape: F, rate: F, x: F) -> VariationalParams<F> {
    let sigma2 = F::one() / (shape + F::one());
    let mu = ((shape + F::one()) / (rate + x)).ln() - sigma2 / F::of(2.0);
    VariationalParams::new(mu, sigma2.sqrt()).expect("valid optimum for valid model")
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainStatus {
    Completed,
    Diverged { epoch: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace<F> {
    /// Mean per-point loss for each completed epoch.
    pub epoch_loss: Vec<F>,
    pub status: TrainStatus,
}

/// One row of the amortization report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointReport<F> {
    pub x: F,
    pub predicted: VariationalParams<F>,
    pub optimum: VariationalParams<F>,
}

/// Comparison of the trained encoder against per-point optima. The gap is
/// the summed ELBO lost by using the shared encoder, estimated with common
/// random numbers so it tightens to zero as the encoder approaches the
/// per-point optima; nonnegative up to Monte Carlo noise. After a diverged
/// run the gap is NaN and the point list may be empty.
#[derive(Clone, Debug, PartialEq)]
pub struct AmortizationReport<F> {
    pub points: Vec<PointReport<F>>,
    pub gap: F,
    pub gap_se: F,
}

const GAP_SAMPLES: usize = 256;

fn amortization_report<F: Scalar>(
    data: &Dataset<F>,
    encoder: &Encoder<F>,
    shape: F,
    rate: F,
    rng: RngState,
) -> Result<AmortizationReport<F>> {
    let family = VariationalFamily::lognormal();
    let mut points = Vec::with_capacity(data.len());
    let mut gap = F::zero();
    let mut gap_var = F::zero();
    let l = F::of(GAP_SAMPLES as f64);
    for (i, &x) in data.values().iter().enumerate() {
        let point = GammaExpModel::new(shape, rate, x)?;
        let predicted = encoder.forward(x)?;
        let optimum = per_point_optimum(shape, rate, x);
        let base = rng.block(i as u64);
        let mut diffs = Vec::with_capacity(GAP_SAMPLES);
        for s_idx in 0..GAP_SAMPLES {
            let mut s = base.substream(s_idx as u64).sampler();
            let eps = NoiseDraw::standard_normal(&mut s);
            let z_opt = family.reparam_sample(optimum, eps);
            let z_pred = family.reparam_sample(predicted, eps);
            let f_opt = point.log_joint(z_opt)? - family.log_density(optimum, z_opt)?;
            let f_pred = point.log_joint(z_pred)? - family.log_density(predicted, z_pred)?;
            diffs.push(f_opt - f_pred);
        }
        let mean = diffs.iter().fold(F::zero(), |a, &b| a + b) / l;
        let ss = diffs
            .iter()
            .fold(F::zero(), |a, &b| a + (b - mean) * (b - mean));
        gap = gap + mean;
        gap_var = gap_var + ss / (l - F::one()) / l;
        points.push(PointReport {
            x,
            predicted,
            optimum,
        });
    }
    Ok(AmortizationReport {
        points,
        gap,
        gap_se: gap_var.sqrt(),
    })
}

/// Trains the encoder by minibatch gradient descent on the amortized
/// objective and reports how close it lands to the per-point optima.
/// The step size decays as step_size / sqrt(epoch + 1); constant steps leave
/// the iterates bouncing in a noise ball the decay shrinks. Divergence (a
/// non-finite loss or gradient) halts training with the trace collected so
/// far; the encoder keeps its last finite state.
pub fn train_amortized<F: Scalar>(
    data: &Dataset<F>,
    shape: F,
    rate: F,
    cfg: &AmortizeConfig<F>,
) -> Result<(Encoder<F>, TrainTrace<F>, AmortizationReport<F>)> {
    cfg.validate(data.len())?;
    let n = data.len();
    let mut encoder = Encoder::init(cfg.hidden, cfg.rng.child(1))?;
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut status = TrainStatus::Completed;
    let mut order: Vec<usize> = (0..n).collect();
    let mut global_step: u64 = 0;

    'training: for epoch in 0..cfg.epochs {
        // deterministic reshuffle per epoch
        let mut s = cfg.rng.child(2).block(epoch as u64).sampler();
        for i in (1..n).rev() {
            let j = (s.uniform_oo() * (i + 1) as f64) as usize;
            order.swap(i, j.min(i));
        }

        let mut epoch_total = F::zero();
        for batch in order.chunks(cfg.batch_size) {
            let step_cfg = AmortizeConfig {
                rng: cfg.rng.block(global_step * n as u64),
                ..*cfg
            };
            let (loss, grad) = match local_elbo_objective(
                data, &encoder, shape, rate, batch, &step_cfg,
            ) {
                Ok(pair) => pair,
                Err(e) => {
                    status = TrainStatus::Diverged {
                        epoch,
                        reason: e.to_string(),
                    };
                    break 'training;
                }
            };
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                status = TrainStatus::Diverged {
                    epoch,
                    reason: "non-finite loss or gradient".to_string(),
                };
                break 'training;
            }
            epoch_total = epoch_total + loss;
            let eta = cfg.step_size / F::of((epoch + 1) as f64).sqrt();
            let scale = eta / F::of(batch.len() as f64);
            let mut flat = encoder.to_flat();
            for (p, g) in flat.iter_mut().zip(&grad) {
                *p = *p - scale * *g;
            }
            encoder = Encoder::from_flat(cfg.hidden, &flat)?;
            global_step += 1;
        }
        epoch_loss.push(epoch_total / F::of(n as f64));
    }

    let report = if status == TrainStatus::Completed {
        amortization_report(data, &encoder, shape, rate, cfg.rng.child(3))?
    } else {
        // the surviving encoder may still map points to extreme parameters;
        // report what is computable and leave the gap undefined
        let mut points = Vec::new();
        for &x in data.values() {
            match encoder.forward(x) {
                Ok(predicted) => points.push(PointReport {
                    x,
                    predicted,
                    optimum: per_point_optimum(shape, rate, x),
                }),
                Err(_) => {
                    points.clear();
                    break;
                }
            }
        }
        AmortizationReport {
            points,
            gap: F::nan(),
            gap_se: F::nan(),
        }
    };
    Ok((
        encoder,
        TrainTrace { epoch_loss, status },
        report,
    ))
}
