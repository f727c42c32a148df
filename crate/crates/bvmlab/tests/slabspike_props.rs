use bvmlab::seqmodel::*;
use bvmlab::slabspike::*;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

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

/// Sparse truth: three large coefficients and two tiny ones above `j₀`.
fn sparse_truth(j: usize) -> SignalCoefficients {
    let b = BasisSpec::haar(j).unwrap();
    let mut c = vec![0.0; b.len()];
    c[0] = 1.0;
    c[haar_position(1, 0)] = 0.6;
    c[haar_position(3, 2)] = 0.5;
    c[haar_position(5, 7)] = -0.3;
    c[haar_position(7, 100)] = 0.4;
    c[haar_position(6, 10)] = 0.005;
    c[haar_position(8, 40)] = -0.005;
    SignalCoefficients::new(b, c).unwrap()
}

#[test]
fn low_levels_are_gaussian() {
    let n = 2000.0;
    let f = sparse_truth(BasisSpec::default_haar_level(n));
    let obs = observe(&f, n, 1).unwrap();
    let post = posterior(&obs, &SlabSpikeConfig::default()).unwrap();
    assert!(post.j0 >= 2);
    let draws = post.sample(3000, 2).unwrap();
    for m in [0, 1, haar_position(post.j0, 1)] {
        let nd = Normal::new(n * obs.y[m] / (n + 1.0), (1.0 / (n + 1.0)).sqrt()).unwrap();
        let d = ks(draws.map_rows(|r| r[m]), |x| nd.cdf(x));
        assert!(d < 1.63 / 3000f64.sqrt(), "position {m}: KS {d}");
    }
}

#[test]
fn ball_mass_matches_monte_carlo() {
    let n = 2000.0;
    let f = sparse_truth(BasisSpec::default_haar_level(n));
    let obs = observe(&f, n, 5).unwrap();
    let post = posterior(&obs, &SlabSpikeConfig::default()).unwrap();
    let w = WeightSequence::power_law(0.1, 1.0, post.basis.max_index).unwrap();
    let kernel = NormKernel::new(&post.basis, &NormSpec::Multiscale(w.clone())).unwrap();
    let m = 20_000;
    let draws = post.sample(m, 6).unwrap();
    let dists = draws.map_rows(|r| kernel.dist(r, &obs.y));
    let mut sorted = dists.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for q in [0.2, 0.5, 0.9] {
        let radius = sorted[(q * m as f64) as usize];
        let exact = post.multiscale_ball_mass(&obs.y, &w, radius);
        let mc = dists.iter().filter(|&&d| d < radius).count() as f64 / m as f64;
        let se = (exact * (1.0 - exact) / m as f64).sqrt();
        assert!(
            (exact - mc).abs() < 4.0 * se + 1e-3,
            "q={q}: exact {exact} vs MC {mc}"
        );
    }
}

#[test]
fn posterior_factorises_over_cylinders() {
    // Small resolution so that 2·10⁵ full draws stay cheap.
    let n = 64.0;
    let b = BasisSpec::haar(6).unwrap();
    let mut c = vec![0.0; b.len()];
    c[0] = 1.0;
    c[haar_position(4, 3)] = 0.35;
    c[haar_position(5, 9)] = 0.2;
    let f = SignalCoefficients::new(b, c).unwrap();
    let obs = observe(&f, n, 3).unwrap();
    let post = posterior(&obs, &SlabSpikeConfig::default()).unwrap();
    let idx = [1, haar_position(4, 3), haar_position(5, 9)];
    let bounds = [(0.0, 1.0), (0.1, 1.0), (-0.5, 0.05)];
    let exact: f64 = idx
        .iter()
        .zip(&bounds)
        .map(|(&m, &(lo, hi))| {
            let p = post.coords[m];
            p.cdf(hi) - p.cdf(lo)
        })
        .product();
    let m = 200_000;
    let hits = post
        .sample(m, 4)
        .unwrap()
        .map_rows(|r| {
            idx.iter()
                .zip(&bounds)
                .all(|(&i, &(lo, hi))| r[i] > lo && r[i] <= hi)
        })
        .iter()
        .filter(|&&h| h)
        .count() as f64
        / m as f64;
    let se = (exact * (1.0 - exact) / m as f64).sqrt();
    assert!(
        (hits - exact).abs() < 4.0 * se,
        "MC {hits} vs product {exact}"
    );
}

#[test]
fn support_recovery() {
    let n: f64 = 2000.0;
    let f = sparse_truth(BasisSpec::default_haar_level(n));
    let scale = (n.ln() / n).sqrt();
    let cfg = SlabSpikeConfig::default();
    let j0 = cfg.j0(n);
    let big: Vec<usize> = (0..f.coeffs.len())
        .filter(|&m| f.coeffs[m].abs() > 4.0 * scale)
        .collect();
    let tiny: Vec<usize> = (0..f.coeffs.len())
        .filter(|&m| {
            haar_level(m) > j0
                && haar_level(m) <= SlabSpikeConfig::jn(n)
                && f.coeffs[m].abs() < scale / 4.0
        })
        .collect();
    assert!(big.len() >= 3);
    let reps = 100;
    let mut big_hits = vec![0; big.len()];
    let mut tiny_excluded = vec![0; tiny.len()];
    for rep in 0..reps {
        let obs = observe(&f, n, 1000 + rep).unwrap();
        let est = posterior_median(&posterior(&obs, &cfg).unwrap());
        for (h, &m) in big_hits.iter_mut().zip(&big) {
            *h += est.contains(m) as usize;
        }
        for (h, &m) in tiny_excluded.iter_mut().zip(&tiny) {
            *h += !est.contains(m) as usize;
        }
    }
    assert!(big_hits.iter().all(|&h| h >= 90), "{big_hits:?}");
    assert!(tiny_excluded.iter().all(|&h| h >= 90));
}

#[test]
fn efficient_estimators_and_projection() {
    let n = 2000.0;
    let f = sparse_truth(BasisSpec::default_haar_level(n));
    let obs = observe(&f, n, 9).unwrap();
    let post = posterior(&obs, &SlabSpikeConfig::default()).unwrap();
    let est = posterior_median(&post);
    let t1 = efficient_estimator(&obs, &est, &post, 1).unwrap();
    let t2 = efficient_estimator(&obs, &est, &post, 2).unwrap();
    let proj = project_on_support(&obs.y, &est);
    for m in 0..obs.y.len() {
        let l = haar_level(m);
        if l <= post.j0 {
            assert_eq!(t1[m], obs.y[m]);
            assert!((t2[m] - n * obs.y[m] / (n + 1.0)).abs() < 1e-12);
        } else {
            assert_eq!(t1[m], t2[m]);
            assert_eq!(t1[m] != 0.0, est.contains(m) && l <= post.jn);
        }
        assert_eq!(proj[m] != 0.0, est.contains(m));
    }
    assert!(efficient_estimator(&obs, &est, &post, 3).is_err());
}

#[test]
fn haar_only() {
    let b = BasisSpec::fourier_sine(100).unwrap();
    let obs = observe(&SignalCoefficients::zeros(b), 100.0, 0).unwrap();
    assert!(posterior(&obs, &SlabSpikeConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn median_halves_the_mixture(y in -1.0f64..1.0, n in 10.0f64..1e5, w in 0.0f64..=1.0) {
        let p = coordinate_posterior(y, n, w).unwrap();
        let med = p.median();
        // F(med⁻) ≤ 1/2 ≤ F(med).
        prop_assert!(p.cdf(med) >= 0.5 - 1e-9);
        let left = if med == 0.0 {
            p.slab_weight * Normal::new(p.slab_mean, p.slab_var.sqrt()).unwrap().cdf(0.0)
        } else {
            p.cdf(med - 1e-9)
        };
        prop_assert!(left <= 0.5 + 1e-6);
    }

    #[test]
    fn weights_bounded(j in 0usize..40, n in 2.0f64..1e7, tau in 0.6f64..5.0, k in 0.5f64..8.0) {
        let cfg = SlabSpikeConfig { j0_rule: J0Rule::SqrtLogN, tau, k_floor: k };
        let w = cfg.weight(j, n);
        prop_assert!(w <= 0.5 && w >= n.powf(-k).min(0.5));
        prop_assert!(cfg.j0(n) < SlabSpikeConfig::jn(n).max(1));
    }

    #[test]
    fn prob_within_is_a_probability(y in -1.0f64..1.0, n in 10.0f64..1e4, w in 0.0f64..=1.0, c in -1.0f64..1.0, r in 0.0f64..1.0) {
        let p = coordinate_posterior(y, n, w).unwrap();
        let v = p.prob_within(c, r);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(p.prob_within(c, r + 0.1) >= v - 1e-15);
    }
}
