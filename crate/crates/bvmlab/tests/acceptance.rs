//! Acceptance suite: one PASS/FAIL line per criterion at its stated
//! tolerance. The exactly-verifiable oracle checks run first; if any of them
//! fails the statistical criteria are not evaluated and the process exits
//! nonzero. Statistical outcomes are reported, not asserted.

use std::time::Instant;

use bvmlab::credsets;
use bvmlab::dirichlethist;
use bvmlab::gaussprior;
use bvmlab::harness::{self, Experiment, ExperimentConfig, Outcome};
use bvmlab::rng::derive_seed;
use bvmlab::seqmodel::{self, BasisSpec, NormSpec, SignalRecipe, WeightSequence};

const SEED: u64 = 20_240_601;

struct Line {
    id: &'static str,
    what: String,
    value: String,
    target: String,
    pass: bool,
}

fn line(
    id: &'static str,
    what: impl Into<String>,
    value: f64,
    target: impl Into<String>,
    pass: bool,
) -> Line {
    Line {
        id,
        what: what.into(),
        value: format!("{value:.4}"),
        target: target.into(),
        pass,
    }
}

fn print(l: &Line) {
    println!(
        "[{}] criterion {:<4} {:<58} value={:<10} target {}",
        if l.pass { "PASS" } else { "FAIL" },
        l.id,
        l.what,
        l.value,
        l.target
    );
}

fn power_sine() -> SignalRecipe {
    SignalRecipe::PowerSine { a: 1.5, b: 1.0 }
}

fn obs_power_sine(n: f64, seed: u64) -> seqmodel::NoisyObservation {
    let basis = harness::basis_for(&power_sine(), n).unwrap();
    let f0 = seqmodel::synthesize_signal(&power_sine(), basis).unwrap();
    seqmodel::observe(&f0, n, seed).unwrap()
}

// ------------------------------------------------------------ criterion 10

fn oracles() -> Vec<Line> {
    let mut out = Vec::new();

    // Gaussian conjugacy: grid Bayes for one coordinate.
    let (n, alpha, y, k) = (50.0f64, 1.0f64, 0.3f64, 3usize);
    let t = (k as f64).powf(2.0 * alpha + 1.0);
    let prior_sd = t.powf(-0.5);
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    let h = 1e-5;
    let mut f = -2.0;
    while f <= 2.0 {
        let w = (-0.5 * (f / prior_sd).powi(2) - 0.5 * n * (y - f).powi(2)).exp();
        z += w;
        m1 += w * f;
        m2 += w * f * f;
        f += h;
    }
    let (gm, gv) = (m1 / z, m2 / z - (m1 / z).powi(2));
    let mut yv = vec![0.0; 5];
    yv[k - 1] = y;
    let obs = seqmodel::NoisyObservation {
        signal_basis: BasisSpec::fourier_sine(5).unwrap(),
        y: yv,
        n,
        seed: 0,
    };
    let post = gaussprior::posterior(&obs, alpha).unwrap();
    let err = (post.means[k - 1] - gm)
        .abs()
        .max((post.variances[k - 1] - gv).abs());
    out.push(line(
        "10a",
        "Gaussian conjugacy vs grid Bayes",
        err,
        "< 1e-6",
        err < 1e-6,
    ));

    // Dirichlet conjugacy at L = 1: the first bin probability is Beta.
    let counts = [7u64, 3u64];
    let dp = dirichlethist::posterior(&counts).unwrap();
    let (mut z, mut m1) = (0.0, 0.0);
    let steps = 200_000;
    for i in 0..steps {
        let p = (i as f64 + 0.5) / steps as f64;
        let w = p.powi(7) * (1.0 - p).powi(3);
        z += w;
        m1 += w * p;
    }
    let err = (dp.mean_probabilities()[0] - m1 / z).abs();
    out.push(line(
        "10b",
        "Dirichlet/Beta conjugacy at L = 1",
        err,
        "< 1e-8",
        err < 1e-8,
    ));

    // Quantile convention.
    let r = credsets::order_statistic(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.8);
    out.push(line(
        "10c",
        "lower empirical quantile {1..5}, γ = 0.2",
        r,
        "= 4",
        r == 4.0,
    ));

    // Norm inequalities on a fixed pseudo-random array.
    let b = BasisSpec::fourier_sine(4096).unwrap();
    let x = gaussprior::sample_prior(0.3, 4096, 7);
    let l2 = seqmodel::norm(&x, &b, &NormSpec::L2).unwrap();
    let hd = seqmodel::norm(&x, &b, &NormSpec::h_delta(2.1)).unwrap();
    let hb = BasisSpec::haar(10).unwrap();
    let xh: Vec<f64> = x[..hb.len()].to_vec();
    let sup = seqmodel::norm(&xh, &hb, &NormSpec::SupNorm { grid_level: 11 }).unwrap();
    let l2h = seqmodel::norm(&xh, &hb, &NormSpec::L2).unwrap();
    let ms = seqmodel::norm(
        &xh,
        &hb,
        &NormSpec::Multiscale(WeightSequence::power_law(0.1, 1.0, 10).unwrap()),
    )
    .unwrap();
    let maxabs = xh.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ok = hd <= l2 && l2h <= sup + 1e-12 && ms <= maxabs;
    out.push(line(
        "10d",
        "norm inequalities H(δ) ≤ ℓ₂, ℓ₂ ≤ sup, M(w) ≤ max",
        hd / l2,
        "all hold",
        ok,
    ));

    // End-to-end determinism.
    let mut cfg = ExperimentConfig::defaults(Experiment::Coverage);
    cfg.replications = 4;
    cfg.draws = 50;
    cfg.n = vec![300.0];
    let render = |c: &ExperimentConfig| match harness::run(c).unwrap() {
        Outcome::Coverage(r) => {
            harness::sha256_hex(&harness::render(&r, harness::Format::Csv).unwrap())
        }
        _ => unreachable!(),
    };
    let (a, b2) = (render(&cfg), render(&cfg));
    out.push(line(
        "10e",
        "determinism: identical checksums on re-run",
        0.0,
        "equal",
        a == b2,
    ));
    out
}

// ------------------------------------------------------------ criteria 1, 2

fn credibility_table() -> Vec<Line> {
    let mut cfg = ExperimentConfig::defaults(Experiment::CredibilityTable);
    cfg.n = vec![2000.0];
    cfg.seed = SEED;
    let report = harness::run_credibility_table(&cfg).unwrap();
    let mut out = Vec::new();
    for row in &report.rows {
        println!(
            "       n={} γ={:.2}: cred(C̃ₙ)={:.4} cred(ℓ₂)={:.4} joint={:.4} expected={:.4} TV={:.4}",
            row.n, row.gamma, row.cred_a, row.cred_b, row.joint, row.expected, row.tv
        );
    }
    for row in &report.rows {
        let t = 1.0 - row.gamma;
        out.push(line(
            "1",
            format!("credibility of C̃ₙ, γ = {:.2}", row.gamma),
            row.cred_a,
            format!("{t:.4} ± 0.005"),
            (row.cred_a - t).abs() <= 0.005,
        ));
        out.push(line(
            "1",
            format!("joint credibility C̃ₙ ∩ ℓ₂ ball, γ = {:.2}", row.gamma),
            row.joint,
            format!("{:.4} ± 0.015", row.expected),
            (row.joint - row.expected).abs() <= 0.015,
        ));
    }
    for row in report
        .rows
        .iter()
        .filter(|r| [0.05, 0.20].contains(&r.gamma))
    {
        out.push(line(
            "2",
            format!("TV between conditioned posteriors, γ = {:.2}", row.gamma),
            row.tv,
            format!("{:.2} ± 0.02", row.gamma),
            (row.tv - row.gamma).abs() <= 0.02,
        ));
    }
    out
}

// ------------------------------------------------------------- criterion 3

fn eb_estimates() -> Vec<Line> {
    let mean_alpha = |n: f64| -> f64 {
        let a: Vec<f64> = (0..20)
            .map(|s| {
                let obs = obs_power_sine(n, derive_seed(SEED, 300 + s));
                gaussprior::empirical_bayes_alpha(&obs).unwrap().alpha_hat
            })
            .collect();
        a.iter().sum::<f64>() / a.len() as f64
    };
    let (m500, m2000) = (mean_alpha(500.0), mean_alpha(2000.0));
    vec![
        line(
            "3",
            "mean α̂ₙ over 20 seeds, n = 2000",
            m2000,
            "∈ [0.86, 1.16]",
            (0.86..=1.16).contains(&m2000),
        ),
        line(
            "3",
            format!("|mean α̂ - 1| at n = 2000 below n = 500 ({m500:.4})"),
            (m2000 - 1.0).abs(),
            format!("< {:.4}", (m500 - 1.0).abs()),
            (m2000 - 1.0).abs() < (m500 - 1.0).abs(),
        ),
    ]
}

// ------------------------------------------------------------- criterion 4

fn coverage() -> Vec<Line> {
    let mut cfg = ExperimentConfig::defaults(Experiment::Coverage);
    cfg.seed = SEED;
    let r = harness::run_coverage(&cfg).unwrap();
    let row = &r.rows[0];
    let mut cfg = ExperimentConfig::defaults(Experiment::OversmoothingDemo);
    cfg.seed = SEED;
    let o = harness::oversmoothing_demo(&cfg).unwrap();
    let orow = &o.rows[0];
    vec![
        line(
            "4",
            format!(
                "coverage of C̃ₙ, n = 2000, γ = 0.05, {} reps (±{:.3}, mean α̂ {:.3})",
                row.replications,
                row.ci_half_width,
                row.mean_alpha.unwrap_or(f64::NAN)
            ),
            row.coverage,
            "∈ [0.91, 0.99]",
            (0.91..=0.99).contains(&row.coverage),
        ),
        line(
            "4",
            format!(
                "oversmoothing (α = 3) ℓ₂-ball coverage, {} reps",
                orow.replications
            ),
            orow.coverage,
            "< 0.2",
            orow.coverage < 0.2,
        ),
    ]
}

// ------------------------------------------------------------- criterion 5

fn scaling() -> Vec<Line> {
    let mut cfg = ExperimentConfig::defaults(Experiment::RadiusScaling);
    cfg.seed = SEED;
    let r = harness::radius_scaling(&cfg).unwrap();
    let rs = r.radius_slope();
    let ds = r.diameter_slope().unwrap_or(f64::NAN);
    vec![
        line(
            "5",
            "log-log slope of ℓ₂ radius, α = 1, n ∈ {500, 2000, 8000}",
            rs,
            "-0.3333 ± 0.05",
            (rs + 1.0 / 3.0).abs() <= 0.05,
        ),
        line(
            "5",
            "log-log slope of C̃ₙ ℓ₂ diameter, β = 1",
            ds,
            "-0.3333 ± 0.08",
            (ds + 1.0 / 3.0).abs() <= 0.08,
        ),
    ]
}

// ------------------------------------------------------------- criterion 6

fn kl() -> Vec<Line> {
    let mut never_exceeds = true;
    let mut mean_kl = |n: f64| -> f64 {
        let mut s = 0.0;
        for seed in 0..20 {
            let obs = obs_power_sine(n, derive_seed(SEED, 600 + seed));
            let d = gaussprior::kl_projection_diagnostic(&obs, 1.0, 5).unwrap();
            never_exceeds &= d.kl <= d.bound;
            s += d.kl;
        }
        s / 20.0
    };
    let (small, large) = (mean_kl(100.0), mean_kl(10_000.0));
    vec![
        line(
            "6",
            "KL(J = 5, α = 1) ratio n = 10² over n = 10⁴",
            small / large,
            "≥ 5",
            small / large >= 5.0,
        ),
        line(
            "6",
            "KL never exceeds (1/2n)Σ[k^{2α+1} + k^{4α+2}Y²]",
            if never_exceeds { 1.0 } else { 0.0 },
            "all 40 runs",
            never_exceeds,
        ),
    ]
}

// ------------------------------------------------------------- criterion 7

fn exponential_spread() -> Vec<Line> {
    let (alpha, s, eta, n) = (1.0f64, 0.5f64, 1.0f64, 2000.0f64);
    let obs = obs_power_sine(n, derive_seed(SEED, 700));
    let post = gaussprior::posterior(&obs, alpha).unwrap();
    let m = 10_000;
    let draws = post.sample(m, derive_seed(SEED, 701)).unwrap();
    let kernel = seqmodel::NormKernel::new(&draws.basis, &NormSpec::sobolev(s)).unwrap();
    let mean = post.posterior_mean();
    let c = 1.0 + 1.0 / (2.0 * (alpha - s));
    let threshold = (1.0 + eta) * c * n.powf(-2.0 * (alpha - s) / (2.0 * alpha + 1.0));
    let tail = draws.map_rows(|r| kernel.dist(r, &mean).powi(2) >= threshold);
    let frac = tail.iter().filter(|&&t| t).count() as f64 / m as f64;
    let bound =
        0.25f64.exp() * (-(eta / 24f64.sqrt()) * c * n.powf(1.0 / (4.0 * alpha + 2.0))).exp();
    let se = (bound.min(1.0) * (1.0 - bound.min(1.0)) / m as f64).sqrt();
    vec![line(
        "7",
        "tail fraction of ‖f - f̂ₙ‖²_{H^s}, (α,s,η,n) = (1,0.5,1,2000)",
        frac,
        format!("≤ {:.4} (bound + 3 SE)", bound + 3.0 * se),
        frac <= bound + 3.0 * se,
    )]
}

// ------------------------------------------------------------- criterion 8

fn slab_spike_band() -> Vec<Line> {
    let mut cfg = ExperimentConfig::defaults(Experiment::Coverage);
    cfg.seed = SEED;
    cfg.apply("prior", "slab-spike").unwrap();
    cfg.apply("signal", "holder:1,1").unwrap();
    cfg.replications = 100;
    cfg.diameter = true;
    let r = harness::run_coverage(&cfg).unwrap();
    let row = &r.rows[0];
    let n: f64 = 2000.0;
    let target = (n / n.ln()).powf(-1.0 / 3.0) * n.ln().powf(0.25);
    let d = row.mean_diameter.unwrap_or(f64::NAN);
    let ratio = d / target;
    vec![
        line(
            "8",
            format!(
                "D̄ₙ coverage, self-similar f₀, n = 2000, {} reps",
                row.replications
            ),
            row.coverage,
            "∈ [0.90, 1.00]",
            (0.90..=1.0).contains(&row.coverage),
        ),
        line(
            "8",
            format!("L∞ diameter {d:.4} / (n/log n)^(-1/3)·vₙ = {target:.4}"),
            ratio,
            "∈ [1/3, 3]",
            (1.0 / 3.0..=3.0).contains(&ratio),
        ),
    ]
}

// ------------------------------------------------------------- criterion 9

fn negative_bvm() -> Vec<Line> {
    let mut cfg = ExperimentConfig::defaults(Experiment::NegativeBvm);
    cfg.seed = SEED;
    let r = harness::run_negative_bvm(&cfg).unwrap();
    let row = &r.rows[2];
    vec![
        line(
            "9",
            format!(
                "escaping mass under Π', stage 3 (n = 2^20), self-similar = {}",
                row.self_similar
            ),
            row.escaping_pi_prime,
            "> 0.9",
            row.escaping_pi_prime > 0.9,
        ),
        line(
            "9",
            "escaping mass under the j₀(n)-thresholded prior, stage 3",
            row.escaping_thresholded,
            "< 0.5",
            row.escaping_thresholded < 0.5,
        ),
    ]
}

fn main() {
    let start = Instant::now();
    let oracle_lines = oracles();
    oracle_lines.iter().for_each(print);
    if oracle_lines.iter().any(|l| !l.pass) {
        println!("oracle suite failed: statistical criteria not evaluated");
        std::process::exit(1);
    }
    let mut lines: Vec<Line> = Vec::new();
    type Group = fn() -> Vec<Line>;
    let groups: [(&str, Group); 8] = [
        ("credibility table", credibility_table),
        ("EB smoothness", eb_estimates),
        ("coverage", coverage),
        ("radius/diameter scaling", scaling),
        ("KL diagnostic", kl),
        ("exponential spread", exponential_spread),
        ("slab-spike band", slab_spike_band),
        ("negative BvM", negative_bvm),
    ];
    for (name, f) in groups {
        let t = Instant::now();
        let ls = f();
        ls.iter().for_each(print);
        println!("       ({name}: {:.1?})", t.elapsed());
        lines.extend(ls);
    }
    let total = lines.len() + oracle_lines.len();
    let passed = lines.iter().chain(&oracle_lines).filter(|l| l.pass).count();
    println!(
        "acceptance: {passed}/{total} lines pass in {:.1?}",
        start.elapsed()
    );
}
