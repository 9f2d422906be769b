//! Brute-force verification tools: quadrature evidence, quadrature KL,
//! quadrature ELBO, density-mass checks, and finite-difference gradients.
//!
//! Everything here favors transparency over sophistication: a composite
//! Simpson rule on a log-transformed axis, refined by node doubling until two
//! successive values agree. This module is the trust anchor the analytic
//! routes are checked against, so it shares no formulas with them beyond the
//! log-density definitions themselves.

use crate::dist::{Distribution, Support};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::Scalar;

/// Controls one quadrature evaluation.
///
/// Integrals over (0, inf) are computed after the substitution y = log z;
/// integrals over the real line use the identity transform. When `bounds`
/// is `None` the operation centers the window on the integrand's mode and
/// widens it until the log-mass has dropped by 60 nats on each side.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureSpec<F> {
    /// Initial Simpson interval count; at least 64, rounded up to even.
    pub nodes: usize,
    /// Absolute agreement required between successive refinements.
    pub tolerance: F,
    /// Refinements (node doublings) allowed before giving up.
    pub max_refinements: usize,
    /// Explicit finite bounds in the transformed coordinate, if any.
    pub bounds: Option<(F, F)>,
}

impl<F: Scalar> Default for QuadratureSpec<F> {
    fn default() -> Self {
        Self {
            nodes: 128,
            tolerance: F::of(1e-10),
            max_refinements: 24,
            bounds: None,
        }
    }
}

impl<F: Scalar> QuadratureSpec<F> {
    fn initial_nodes(&self) -> usize {
        let n = self.nodes.max(64);
        n + n % 2
    }

    fn resolve_bounds(&self, log_mass: impl Fn(F) -> F) -> Result<(F, F)> {
        if let Some((lo, hi)) = self.bounds {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidParameter {
                    name: "bounds",
                    reason: format!("must be finite with lo < hi, got ({lo}, {hi})"),
                });
            }
            return Ok((lo, hi));
        }
        auto_bounds(log_mass)
    }
}

// Widest transformed coordinate the auto-window will ever touch; exp() stays
// finite well inside this.
const SCAN_LIMIT: f64 = 700.0;

/// Locates the mode of a log-mass function by coarse scan plus ternary
/// refinement, then expands a window around it until the function has
/// dropped 60 nats on both sides.
fn auto_bounds<F: Scalar>(log_mass: impl Fn(F) -> F) -> Result<(F, F)> {
    let mut best_y = F::zero();
    let mut best_h = F::neg_infinity();
    let step = 0.05_f64;
    let n_steps = (2.0 * 60.0 / step) as usize;
    for i in 0..=n_steps {
        let y = F::of(-60.0 + step * i as f64);
        let h = log_mass(y);
        if h.is_finite() && h > best_h {
            best_h = h;
            best_y = y;
        }
    }
    if !best_h.is_finite() {
        return Err(Error::InvalidParameter {
            name: "integrand",
            reason: "no finite mass found on the scan window".to_string(),
        });
    }
    // ternary refinement inside the bracketing cell
    let mut lo = best_y - F::of(step);
    let mut hi = best_y + F::of(step);
    for _ in 0..200 {
        let third = (hi - lo) / F::of(3.0);
        let a = lo + third;
        let b = hi - third;
        if log_mass(a) < log_mass(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let mode = (lo + hi) / F::of(2.0);
    let peak = log_mass(mode);

    // curvature at the mode gives a width scale; fall back to 1 if flat
    let delta = F::of(1e-3) * F::one().max(mode.abs());
    let second = (log_mass(mode + delta) - F::of(2.0) * peak + log_mass(mode - delta))
        / (delta * delta);
    let width = if second.is_finite() && second < F::zero() {
        (-second).recip().sqrt()
    } else {
        F::one()
    };

    let drop = peak - F::of(60.0);
    let mut lo = mode - F::of(12.0) * width;
    let mut hi = mode + F::of(12.0) * width;
    let limit = F::of(SCAN_LIMIT);
    for _ in 0..10_000 {
        if log_mass(lo) < drop || lo <= -limit {
            break;
        }
        lo = lo - F::of(4.0) * width;
    }
    for _ in 0..10_000 {
        if log_mass(hi) < drop || hi >= limit {
            break;
        }
        hi = hi + F::of(4.0) * width;
    }
    Ok((lo.max(-limit), hi.min(limit)))
}

/// Composite Simpson rule with `n` intervals (n even).
fn simpson<F: Scalar>(g: &impl Fn(F) -> F, lo: F, hi: F, n: usize) -> F {
    let h = (hi - lo) / F::of(n as f64);
    let mut acc = g(lo) + g(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { F::of(4.0) } else { F::of(2.0) };
        acc = acc + w * g(lo + h * F::of(i as f64));
    }
    acc * h / F::of(3.0)
}

/// Simpson rule for log(integral of exp(h)), stabilized around the max node.
fn simpson_log<F: Scalar>(h: &impl Fn(F) -> F, lo: F, hi: F, n: usize) -> F {
    let step = (hi - lo) / F::of(n as f64);
    let values: Vec<F> = (0..=n).map(|i| h(lo + step * F::of(i as f64))).collect();
    let m = values
        .iter()
        .copied()
        .fold(F::neg_infinity(), |a, b| if b > a && b.is_finite() { b } else { a });
    if !m.is_finite() {
        return F::neg_infinity();
    }
    let mut acc = F::zero();
    for (i, &v) in values.iter().enumerate() {
        let w = if i == 0 || i == n {
            F::one()
        } else if i % 2 == 1 {
            F::of(4.0)
        } else {
            F::of(2.0)
        };
        acc = acc + w * (v - m).exp();
    }
    m + (acc * step / F::of(3.0)).ln()
}

/// Doubles nodes until two successive evaluations agree to the tolerance.
fn refine_until_stable<F: Scalar>(
    eval: impl Fn(usize) -> F,
    spec: &QuadratureSpec<F>,
) -> Result<F> {
    let mut n = spec.initial_nodes();
    let mut prev = eval(n);
    for _ in 0..spec.max_refinements {
        n *= 2;
        let cur = eval(n);
        if (cur - prev).abs() < spec.tolerance {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureNoConvergence {
        previous: prev.as_f64(),
        latest: eval(n * 2).as_f64(),
    })
}

/// log p(x) by quadrature of exp(log_joint) over the latent support.
pub fn quad_log_evidence<F: Scalar, M: Model<F> + ?Sized>(
    model: &M,
    spec: &QuadratureSpec<F>,
) -> Result<F> {
    let h = transformed_log_integrand(model.latent_support(), |z| {
        model.log_joint(z).unwrap_or(F::neg_infinity())
    });
    let (lo, hi) = spec.resolve_bounds(&h)?;
    refine_until_stable(|n| simpson_log(&h, lo, hi, n), spec)
}

/// KL(q || p) = integral of q log(q/p), by quadrature over q's support.
///
/// Errors when q's support is not contained in p's (the silent-failure case
/// this crate guards against throughout).
pub fn quad_kl<F: Scalar>(
    q: &Distribution<F>,
    p: &Distribution<F>,
    spec: &QuadratureSpec<F>,
) -> Result<F> {
    if !q.support().is_subset_of(p.support()) {
        return Err(Error::SupportMismatch {
            q: q.support(),
            target: p.support(),
        });
    }
    let log_mass = transformed_log_integrand(q.support(), |z| {
        q.log_pdf(z).unwrap_or(F::neg_infinity())
    });
    let delta = |z: F| {
        let lq = q.log_pdf(z).unwrap_or(F::neg_infinity());
        let lp = p.log_pdf(z).unwrap_or(F::neg_infinity());
        lq - lp
    };
    weighted_quadrature(q.support(), log_mass, delta, spec)
}

/// ELBO by quadrature: integral of q (log_joint - log q) over q's support.
pub fn quad_elbo<F: Scalar, M: Model<F> + ?Sized>(
    model: &M,
    q: &Distribution<F>,
    spec: &QuadratureSpec<F>,
) -> Result<F> {
    if !q.support().is_subset_of(model.latent_support()) {
        return Err(Error::SupportMismatch {
            q: q.support(),
            target: model.latent_support(),
        });
    }
    let log_mass = transformed_log_integrand(q.support(), |z| {
        q.log_pdf(z).unwrap_or(F::neg_infinity())
    });
    let delta = |z: F| {
        let lq = q.log_pdf(z).unwrap_or(F::neg_infinity());
        let lj = model.log_joint(z).unwrap_or(F::neg_infinity());
        lj - lq
    };
    weighted_quadrature(q.support(), log_mass, delta, spec)
}

/// Total mass of a density by quadrature; should be 1 for a proper density.
pub fn quad_total_mass<F: Scalar>(d: &Distribution<F>, spec: &QuadratureSpec<F>) -> Result<F> {
    let h = transformed_log_integrand(d.support(), |z| {
        d.log_pdf(z).unwrap_or(F::neg_infinity())
    });
    let (lo, hi) = spec.resolve_bounds(&h)?;
    let log_mass = refine_until_stable(|n| simpson_log(&h, lo, hi, n), spec)?;
    Ok(log_mass.exp())
}

/// Returns y -> log density-mass in the transformed coordinate: for the
/// positive half line the substitution y = log z contributes the Jacobian
/// term + y; the real line passes through unchanged.
fn transformed_log_integrand<F: Scalar>(
    support: Support,
    log_f: impl Fn(F) -> F,
) -> impl Fn(F) -> F {
    move |y: F| match support {
        Support::PositiveReals => log_f(y.exp()) + y,
        Support::AllReals => log_f(y),
    }
}

// Integrates exp(log_mass(y)) * delta(z(y)) where delta is evaluated in the
// original coordinate. The window comes from the mass alone, so signed or
// vanishing integrands cannot confuse the mode search.
fn weighted_quadrature<F: Scalar>(
    support: Support,
    log_mass: impl Fn(F) -> F,
    delta: impl Fn(F) -> F,
    spec: &QuadratureSpec<F>,
) -> Result<F> {
    let (lo, hi) = spec.resolve_bounds(&log_mass)?;
    let g = |y: F| {
        let w = log_mass(y).exp();
        if w == F::zero() {
            return F::zero();
        }
        let z = match support {
            Support::PositiveReals => y.exp(),
            Support::AllReals => y,
        };
        let d = delta(z);
        if d.is_finite() {
            w * d
        } else {
            // zero weight regions contribute nothing even when the log
            // ratio is infinite there
            F::zero()
        }
    };
    refine_until_stable(|n| simpson(&g, lo, hi, n), spec)
}

/// Central finite differences of `f` at `theta`, component step
/// h * max(1, |theta_j|).
pub fn finite_diff_grad<F: Scalar>(
    f: impl Fn(&[F]) -> F,
    theta: &[F],
    h: F,
) -> Result<Vec<F>> {
    let mut grad = Vec::with_capacity(theta.len());
    let mut probe = theta.to_vec();
    for j in 0..theta.len() {
        let hj = h * F::one().max(theta[j].abs());
        probe[j] = theta[j] + hj;
        let fp = f(&probe);
        probe[j] = theta[j] - hj;
        let fm = f(&probe);
        probe[j] = theta[j];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite {
                name: "finite-difference evaluation",
                value: if fp.is_finite() { fm.as_f64() } else { fp.as_f64() },
            });
        }
        grad.push((fp - fm) / (F::of(2.0) * hj));
    }
    Ok(grad)
}
