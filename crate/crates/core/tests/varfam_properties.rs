//! Variational-family invariants: the score has zero expectation, the
//! reparameterization pushforward reproduces the family, the score matches
//! finite differences of the log-density, and the path is continuous in the
//! parameters.

use parvi::oracle::finite_diff_grad;
use parvi::rng::RngState;
use parvi::varfam::{NoiseDraw, VariationalFamily, VariationalParams};
use parvi::Real;

fn both_families() -> [VariationalFamily; 2] {
    [VariationalFamily::lognormal(), VariationalFamily::normal()]
}

fn random_params(s: &mut parvi::rng::Sampler) -> VariationalParams<Real> {
    let mu = 2.0 * (2.0 * s.uniform_oo() - 1.0);
    let sigma = 0.2 + 1.3 * s.uniform_oo();
    VariationalParams::new(mu, sigma).unwrap()
}

#[test]
fn score_has_zero_expectation() {
    let n = 100_000;
    for (fi, family) in both_families().into_iter().enumerate() {
        let mut src = RngState::new(700 + fi as u64, 0).sampler();
        for rep in 0..5 {
            let params = random_params(&mut src);
            let rng = RngState::new(710 + fi as u64, rep);
            let mut sampler = rng.sampler();
            let mut sums = [0.0_f64; 2];
            let mut sq = [0.0_f64; 2];
            for _ in 0..n {
                let z = family.draw(params, &mut sampler);
                let sc = family.score(params, z).unwrap();
                for c in 0..2 {
                    sums[c] += sc[c];
                    sq[c] += sc[c] * sc[c];
                }
            }
            for c in 0..2 {
                let mean = sums[c] / n as f64;
                let var = (sq[c] - sums[c] * sums[c] / n as f64) / (n - 1) as f64;
                let se = (var / n as f64).sqrt();
                assert!(
                    mean.abs() < 4.0 * se,
                    "family {fi} rep {rep} component {c}: mean {mean}, se {se}"
                );
            }
        }
    }
}

#[test]
fn reparam_pushforward_matches_the_family_at_deciles() {
    let n = 100_000;
    let bound = 1.63 / (n as f64).sqrt();
    for (fi, family) in both_families().into_iter().enumerate() {
        let params = VariationalParams::new(0.3_f64, 0.8).unwrap();
        let q = family.distribution(params);
        let mut s = RngState::new(42 + fi as u64, 0).sampler();
        let mut zs: Vec<Real> = (0..n)
            .map(|_| family.reparam_sample(params, NoiseDraw::standard_normal(&mut s)))
            .collect();
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for dec in 1..10 {
            let target = dec as f64 / 10.0;
            // invert the analytic CDF by bisection over the sorted sample range
            let (mut lo, mut hi) = (zs[0] - 1.0, zs[n - 1] + 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if q.cdf(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let x = 0.5 * (lo + hi);
            let empirical = zs.partition_point(|&v| v <= x) as f64 / n as f64;
            assert!(
                (empirical - target).abs() < bound,
                "family {fi} decile {target}: empirical {empirical}"
            );
        }
    }
}

#[test]
fn two_sample_agreement_between_reparam_and_direct_draws() {
    // pushforward draws against direct sampling of the same member
    let n = 100_000usize;
    let family = VariationalFamily::normal();
    let params = VariationalParams::new(0.0_f64, 1.0).unwrap();
    let mut a: Vec<Real> = {
        let mut s = RngState::new(91, 0).sampler();
        (0..n)
            .map(|_| family.reparam_sample(params, NoiseDraw::standard_normal(&mut s)))
            .collect()
    };
    let mut b = family.distribution(params).sample(RngState::new(91, 0), n);
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut d_max = 0.0_f64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < n {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d_max = d_max.max((i as f64 / n as f64 - j as f64 / n as f64).abs());
    }
    assert!(d_max < 1.63 / (n as f64).sqrt(), "KS distance {d_max}");
}

#[test]
fn score_matches_finite_differences_of_the_log_density() {
    let mut src = RngState::new(77, 0).sampler();
    for (fi, family) in both_families().into_iter().enumerate() {
        for rep in 0..20 {
            let params = random_params(&mut src);
            let z = family.draw(params, &mut src);
            let analytic = family.score(params, z).unwrap();
            let fd = finite_diff_grad(
                |t: &[Real]| {
                    let p = VariationalParams::new(t[0], t[1]).unwrap();
                    family.log_density(p, z).unwrap()
                },
                &[params.loc(), params.scale()],
                1e-5,
            )
            .unwrap();
            for c in 0..2 {
                let denom = analytic[c].abs().max(1.0);
                assert!(
                    ((analytic[c] - fd[c]) / denom).abs() < 1e-5,
                    "family {fi} rep {rep} component {c}: {} vs {}",
                    analytic[c],
                    fd[c]
                );
            }
        }
    }
}

#[test]
fn reparam_path_is_continuous_in_the_parameters() {
    // |g_{theta+delta}(eps) - g_theta(eps)| shrinks linearly with delta for
    // every eps on the grid
    let eps_grid = [-2.5, -1.0, -0.3, 0.0, 0.4, 1.1, 2.7];
    for family in both_families() {
        let params = VariationalParams::new(0.4_f64, 0.7).unwrap();
        for &e in &eps_grid {
            let base = family.reparam_sample(params, NoiseDraw(e));
            let lipschitz = 10.0 * (1.0 + base.abs()) * (1.0 + e.abs());
            for &delta in &[1e-2_f64, 1e-4, 1e-6, 1e-8] {
                let shifted = VariationalParams::new(0.4 + delta, 0.7 + delta).unwrap();
                let gap = (family.reparam_sample(shifted, NoiseDraw(e)) - base).abs();
                assert!(
                    gap <= lipschitz * delta + 1e-12,
                    "gap {gap} at eps {e}, delta {delta}"
                );
            }
        }
    }
}

#[test]
fn reparam_jacobian_matches_finite_differences_at_fixed_noise() {
    let mut src = RngState::new(78, 0).sampler();
    for family in both_families() {
        for _ in 0..10 {
            let params = random_params(&mut src);
            let eps = NoiseDraw(2.5 * (2.0 * src.uniform_oo() - 1.0));
            let analytic = family.reparam_jacobian(params, eps);
            let fd = finite_diff_grad(
                |t: &[Real]| {
                    let p = VariationalParams::new(t[0], t[1]).unwrap();
                    family.reparam_sample(p, eps)
                },
                &[params.loc(), params.scale()],
                1e-6,
            )
            .unwrap();
            for c in 0..2 {
                let denom = analytic[c].abs().max(1.0);
                assert!(
                    ((analytic[c] - fd[c]) / denom).abs() < 1e-6,
                    "{:?} component {c}: {} vs {}",
                    family.kind(),
                    analytic[c],
                    fd[c]
                );
            }
        }
    }
}

#[test]
fn normal_family_is_compatible_with_a_real_line_latent() {
    struct RealLineModel;
    impl parvi::Model<Real> for RealLineModel {
        fn log_joint(&self, z: Real) -> parvi::Result<Real> {
            Ok(-0.5 * z * z)
        }
        fn log_joint_grad_z(&self, z: Real) -> parvi::Result<Real> {
            Ok(-z)
        }
        fn latent_support(&self) -> parvi::Support {
            parvi::Support::AllReals
        }
    }
    assert!(parvi::varfam::support_compatible(&VariationalFamily::normal(), &RealLineModel).is_ok());
    assert!(
        parvi::varfam::support_compatible(&VariationalFamily::lognormal(), &RealLineModel).is_ok()
    );
}

#[test]
fn normal_score_equals_the_direct_partial_derivative_formulas() {
    // the per-sample weight the score-function estimator uses must be the
    // hand-derived normal-family partial derivatives, sample by sample
    let family = VariationalFamily::normal();
    let params = VariationalParams::new(0.3_f64, 0.7).unwrap();
    let (mu, sigma) = (params.loc(), params.scale());
    let mut s = RngState::new(13, 0).sampler();
    for _ in 0..1000 {
        let z = family.draw(params, &mut s);
        let score = family.score(params, z).unwrap();
        let d = z - mu;
        let s2 = sigma * sigma;
        let expected = [d / s2, (d * d / s2 - 1.0) / sigma];
        assert_eq!(score[0].to_bits(), expected[0].to_bits());
        assert_eq!(score[1].to_bits(), expected[1].to_bits());
    }
}
