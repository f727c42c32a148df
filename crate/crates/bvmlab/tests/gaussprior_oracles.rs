use bvmlab::gaussprior::*;
use bvmlab::rng::rng_from_seed;
use bvmlab::seqmodel::*;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

fn power_sine_obs(k: usize, n: f64, seed: u64) -> NoisyObservation {
    let b = BasisSpec::fourier_sine(k).unwrap();
    let f = synthesize_signal(&SignalRecipe::PowerSine { a: 1.5, b: 1.0 }, b).unwrap();
    observe(&f, n, seed).unwrap()
}

/// Kolmogorov–Smirnov statistic of `xs` against `cdf`.
fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / m).abs().max(((i + 1) as f64 / m - c).abs())
        })
        .fold(0.0, f64::max)
}

/// 1% critical value of the one-sample KS statistic.
fn ks_crit(m: usize) -> f64 {
    1.63 / (m as f64).sqrt()
}

fn direct_log_marginal(y: &[f64], n: f64, alpha: f64) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, &yk)| {
            let v = ((i + 1) as f64).powf(-2.0 * alpha - 1.0) + 1.0 / n;
            -0.5 * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * yk * yk / v
        })
        .sum()
}

#[test]
fn conjugate_posterior_matches_grid_bayes() {
    let obs = power_sine_obs(50, 200.0, 5);
    for alpha in [0.3, 1.0, 2.5] {
        let post = posterior(&obs, alpha).unwrap();
        for k in 0..50 {
            // Unnormalised prior × likelihood on a fine grid, cumulated with the trapezoid rule.
            let prior_var = ((k + 1) as f64).powf(-2.0 * alpha - 1.0);
            let (m, s) = (post.means[k], post.variances[k].sqrt());
            let (lo, hi) = (m - 12.0 * s, m + 12.0 * s);
            let steps = 40_000;
            let h = (hi - lo) / steps as f64;
            let dens =
                |f: f64| (-0.5 * f * f / prior_var - 0.5 * obs.n * (obs.y[k] - f).powi(2)).exp();
            let mut cum = vec![0.0; steps + 1];
            for i in 1..=steps {
                let a = lo + (i - 1) as f64 * h;
                cum[i] = cum[i - 1] + 0.5 * h * (dens(a) + dens(a + h));
            }
            let total = cum[steps];
            let nd = Normal::new(m, s).unwrap();
            let sup = (0..=steps)
                .step_by(50)
                .map(|i| (cum[i] / total - nd.cdf(lo + i as f64 * h)).abs())
                .fold(0.0, f64::max);
            assert!(sup < 1e-6, "α={alpha} k={k}: sup CDF gap {sup}");
        }
    }
}

#[test]
fn marginal_loglik_differs_from_direct_by_a_constant() {
    let obs = power_sine_obs(400, 500.0, 8);
    let alphas = [0.05, 0.4, 1.0, 1.7, 2.4];
    let offs: Vec<f64> = alphas
        .iter()
        .map(|&a| direct_log_marginal(&obs.y, obs.n, a) - marginal_loglik(&obs, a).unwrap())
        .collect();
    for o in &offs {
        assert!(
            (o - offs[0]).abs() < 1e-8 * offs[0].abs().max(1.0),
            "{offs:?}"
        );
    }
}

#[test]
fn eb_argmax_matches_brute_force_grid() {
    for seed in 0..5 {
        let obs = power_sine_obs(1000, 500.0, 100 + seed);
        let eb = empirical_bayes_alpha(&obs).unwrap();
        // The direct log-density is ℓₙ plus a constant, so it has the same maximiser.
        let (lo, hi) = (eb.alpha_min, eb.a_n);
        let steps = 20_000;
        let (mut best, mut best_v) = (lo, f64::NEG_INFINITY);
        for i in 0..=steps {
            let a = lo + (hi - lo) * i as f64 / steps as f64;
            let v = direct_log_marginal(&obs.y, obs.n, a);
            if v > best_v {
                best = a;
                best_v = v;
            }
        }
        assert!(
            (eb.alpha_hat - best).abs() < 2e-3,
            "seed {seed}: {} vs {best}",
            eb.alpha_hat
        );
        assert!(eb.loglik_at_hat >= marginal_loglik(&obs, best).unwrap() - 1e-9);
    }
}

#[test]
fn eb_insensitive_to_truncation_length() {
    // Same noise realisation observed at two truncation lengths.
    let big = 200_000;
    let n: f64 = 1000.0;
    let mut rng = rng_from_seed(77);
    let y: Vec<f64> = (1..=big)
        .map(|k| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (k as f64).powf(-1.5) * (k as f64).sin() + z / n.sqrt()
        })
        .collect();
    let mk = |len: usize| NoisyObservation {
        signal_basis: BasisSpec::fourier_sine(len).unwrap(),
        y: y[..len].to_vec(),
        n,
        seed: 77,
    };
    let short = empirical_bayes_alpha(&mk(2000)).unwrap().alpha_hat;
    let long = empirical_bayes_alpha(&mk(big)).unwrap().alpha_hat;
    assert!((short - long).abs() < 0.02, "{short} vs {long}");
}

#[test]
fn sampled_coordinate_follows_posterior_law() {
    let obs = power_sine_obs(300, 500.0, 3);
    let post = posterior(&obs, 1.2).unwrap();
    let draws = post.sample(4000, 11).unwrap();
    let col: Vec<f64> = draws.map_rows(|r| r[2]);
    let nd = Normal::new(post.means[2], post.variances[2].sqrt()).unwrap();
    let d = ks(col, |x| nd.cdf(x));
    assert!(d < ks_crit(4000), "KS {d}");
}

#[test]
fn hierarchical_draws_follow_mixture_law() {
    let obs = power_sine_obs(300, 500.0, 4);
    let hp = hierarchical_marginal(&obs, Hyperprior::default(), HB_GRID).unwrap();
    let w = hp.weights();
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let draws = sample_hierarchical(&hp, &obs, 4000, 12).unwrap();
    for k in [0usize, 5] {
        let comps: Vec<(f64, Normal)> = hp
            .grid
            .iter()
            .zip(&w)
            .filter(|(_, w)| **w > 1e-14)
            .map(|(&a, &wt)| {
                let t = ((k + 1) as f64).powf(2.0 * a + 1.0);
                (
                    wt,
                    Normal::new(obs.n * obs.y[k] / (t + obs.n), (1.0 / (t + obs.n)).sqrt())
                        .unwrap(),
                )
            })
            .collect();
        let mass: f64 = comps.iter().map(|c| c.0).sum();
        let col: Vec<f64> = draws.map_rows(|r| r[k]);
        let d = ks(col, |x| {
            comps.iter().map(|(wt, nd)| wt * nd.cdf(x)).sum::<f64>() / mass
        });
        assert!(d < ks_crit(4000), "coordinate {k}: KS {d}");
    }
    // Mean is the weight average of fixed-α means.
    let hm = hierarchical_mean(&hp, &obs);
    let mut want = vec![0.0; obs.y.len()];
    for (a, wt) in hp.grid.iter().zip(&w) {
        for (o, m) in want.iter_mut().zip(posterior(&obs, *a).unwrap().means) {
            *o += wt * m;
        }
    }
    for (a, b) in hm.iter().zip(&want) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn kl_matches_gaussian_formula_and_bound() {
    for seed in 0..10 {
        let obs = power_sine_obs(500, 1000.0, 200 + seed);
        for (alpha, j) in [(0.5, 5), (1.0, 20), (2.0, 50)] {
            let d = kl_projection_diagnostic(&obs, alpha, j).unwrap();
            // Standard N(μ, σ²) ‖ N(0, 1) divergence per coordinate.
            let mut want = 0.0;
            for k in 0..j {
                let t = ((k + 1) as f64).powf(2.0 * alpha + 1.0);
                let s2 = obs.n / (t + obs.n);
                let mu = obs.n.sqrt() * (obs.n * obs.y[k] / (t + obs.n) - obs.y[k]);
                want += 0.5 * (s2 + mu * mu - 1.0 - s2.ln());
            }
            assert!(
                (d.kl - want).abs() < 1e-9 * want.max(1e-6),
                "{} vs {want}",
                d.kl
            );
            assert!(d.kl >= 0.0);
            assert!(d.kl <= d.bound + 1e-12);
        }
    }
}

#[test]
fn kl_decreases_with_n_on_average() {
    let avg = |n: f64| {
        (0..20)
            .map(|s| {
                kl_projection_diagnostic(&power_sine_obs(200, n, 300 + s), 1.0, 10)
                    .unwrap()
                    .kl
            })
            .sum::<f64>()
            / 20.0
    };
    let (a, b, c) = (avg(1e2), avg(1e3), avg(1e4));
    assert!(a >= b && b >= c, "{a} {b} {c}");
}

#[test]
fn exponential_spread_inequality() {
    let (alpha, s, eta) = (1.0, 0.5, 1.0);
    let m = 10_000;
    for n in [500.0, 2000.0] {
        let obs = power_sine_obs(4000, n, 17);
        let post = posterior(&obs, alpha).unwrap();
        let kernel = NormKernel::new(&post.basis, &NormSpec::sobolev(s)).unwrap();
        let draws = post.sample(m, 19).unwrap();
        let mean = post.posterior_mean();
        let c = 1.0 + 1.0 / (2.0 * (alpha - s));
        let thr = (1.0 + eta) * c * n.powf(-2.0 * (alpha - s) / (2.0 * alpha + 1.0));
        let frac = draws
            .map_rows(|r| kernel.dist(r, &mean).powi(2) >= thr)
            .iter()
            .filter(|&&b| b)
            .count() as f64
            / m as f64;
        let bound =
            0.25f64.exp() * (-(eta / 24f64.sqrt()) * c * n.powf(1.0 / (4.0 * alpha + 2.0))).exp();
        let se = (bound.min(1.0) * (1.0 - bound.min(1.0)) / m as f64).sqrt();
        assert!(frac <= bound + 3.0 * se, "n={n}: {frac} > {bound}");
    }
}

#[test]
fn prior_draw_scale() {
    // Coordinate k of a prior draw has variance k^{-2α-1}.
    let k = 10usize;
    let vals: Vec<f64> = (0..4000).map(|s| sample_prior(1.0, k, s)[k - 1]).collect();
    let var = vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64;
    let want = (k as f64).powf(-3.0);
    assert!((var / want - 1.0).abs() < 0.1, "{var} vs {want}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn posterior_shrinks_toward_zero(
        y in prop::collection::vec(-1.0f64..1.0, 1..60),
        alpha in 0.0f64..4.0,
        n in 1.0f64..1e5,
    ) {
        let obs = NoisyObservation { signal_basis: BasisSpec::fourier_sine(y.len()).unwrap(), y, n, seed: 0 };
        let p = posterior(&obs, alpha).unwrap();
        for k in 0..obs.y.len() {
            prop_assert!(p.means[k].abs() <= obs.y[k].abs());
            prop_assert!(p.variances[k] > 0.0 && p.variances[k] < 1.0 / n);
        }
    }

    #[test]
    fn eb_stays_in_search_box(seed in 0u64..1000, n in 50.0f64..5000.0) {
        let obs = power_sine_obs(2 * n as usize, n, seed);
        let eb = empirical_bayes_alpha(&obs).unwrap();
        prop_assert!(eb.alpha_hat >= eb.alpha_min && eb.alpha_hat <= eb.a_n);
        for (a, v) in eb.curve_alpha.iter().zip(&eb.curve_loglik) {
            prop_assert!(*v <= eb.loglik_at_hat + 1e-9, "grid point {} beats the maximiser", a);
        }
    }
}
