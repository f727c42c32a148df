//! Gaussian priors `f_k ~ N(0, k^{-2α-1})` on Fourier-type coefficients:
//! the conjugate fixed-α posterior, empirical Bayes selection of `α` by
//! marginal likelihood, the hierarchical posterior over `α` by grid
//! quadrature, and the projected Kullback–Leibler diagnostic.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::draws::{PosteriorDrawSet, Provenance, Sampler};
use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;
use crate::seqmodel::{BasisSpec, NoisyObservation};

/// Lower end of the smoothness search box.
pub const ALPHA_MIN: f64 = 0.01;
/// Coarse grid size of the empirical Bayes search.
pub const EB_GRID: usize = 400;
/// Golden-section tolerance of the empirical Bayes search.
pub const EB_TOL: f64 = 1e-4;
/// Default hierarchical quadrature grid size.
pub const HB_GRID: usize = 600;

/// Upper end `a_n = log n / log log n` of the smoothness search box. The
/// map has its minimum `e` at `n = e^e`; below that point the floor `e` is
/// used so that the box stays nondegenerate.
pub fn search_upper(n: f64) -> f64 {
    if n <= std::f64::consts::E.powf(std::f64::consts::E) {
        std::f64::consts::E
    } else {
        n.ln() / n.ln().ln()
    }
}

fn require_sequence(obs: &NoisyObservation) -> Result<()> {
    if obs.signal_basis.is_wavelet() {
        return Err(Error::BasisMismatch(
            "the Gaussian smoothness priors act on Fourier-type indexing".into(),
        ));
    }
    Ok(())
}

/// Per-coordinate conjugate posterior under `Π_α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaPosterior {
    pub alpha: f64,
    pub n: f64,
    pub basis: BasisSpec,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Seed of the observation the posterior was computed from.
    pub source_seed: u64,
}

/// `μ_k = nY_k/(k^{2α+1}+n)`, `σ_k² = 1/(k^{2α+1}+n)`.
pub fn posterior(obs: &NoisyObservation, alpha: f64) -> Result<AlphaPosterior> {
    require_sequence(obs)?;
    if !(alpha >= 0.0) {
        return invalid("α must be nonnegative");
    }
    let n = obs.n;
    let e = 2.0 * alpha + 1.0;
    let mut means = Vec::with_capacity(obs.y.len());
    let mut variances = Vec::with_capacity(obs.y.len());
    for (i, y) in obs.y.iter().enumerate() {
        let t = ((i + 1) as f64).powf(e);
        means.push(n * y / (t + n));
        variances.push(1.0 / (t + n));
    }
    Ok(AlphaPosterior {
        alpha,
        n,
        basis: obs.signal_basis,
        means,
        variances,
        source_seed: obs.seed,
    })
}

impl AlphaPosterior {
    pub fn sample(&self, m: usize, seed: u64) -> Result<PosteriorDrawSet> {
        if m == 0 {
            return invalid("need at least one draw");
        }
        let sampler = Sampler::Gaussian {
            means: self.means.clone(),
            sds: self.variances.iter().map(|v| v.sqrt()).collect(),
        };
        let provenance = Provenance {
            prior: "gaussian_fixed_alpha".into(),
            hyper: format!("alpha={}", self.alpha),
            n: self.n,
            seed,
        };
        Ok(PosteriorDrawSet::new(
            self.basis, m, seed, provenance, sampler,
        ))
    }

    pub fn posterior_mean(&self) -> Vec<f64> {
        self.means.clone()
    }
}

pub fn sample(post: &AlphaPosterior, m: usize, seed: u64) -> Result<PosteriorDrawSet> {
    post.sample(m, seed)
}

pub fn posterior_mean(post: &AlphaPosterior) -> Vec<f64> {
    post.posterior_mean()
}

/// One prior draw `f_k = k^{-α-1/2} Z_k`, `k = 1..=len`.
pub fn sample_prior(alpha: f64, len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (1..=len)
        .map(|k| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (k as f64).powf(-alpha - 0.5) * z
        })
        .collect()
}

/// Cached `log k` and `Y_k²` for repeated marginal-likelihood evaluation.
#[derive(Debug, Clone)]
pub struct LogLik {
    n: f64,
    ln_k: Vec<f64>,
    y2: Vec<f64>,
}

impl LogLik {
    pub fn new(obs: &NoisyObservation) -> Result<Self> {
        require_sequence(obs)?;
        Ok(Self {
            n: obs.n,
            ln_k: (1..=obs.y.len()).map(|k| (k as f64).ln()).collect(),
            y2: obs.y.iter().map(|y| y * y).collect(),
        })
    }

    /// `ℓₙ(α) = -½ Σ [log(1 + n/k^{2α+1}) - n²Y_k²/(k^{2α+1}+n)]`.
    pub fn eval(&self, alpha: f64) -> f64 {
        let e = 2.0 * alpha + 1.0;
        let n = self.n;
        let mut acc = 0.0;
        for (lk, y2) in self.ln_k.iter().zip(&self.y2) {
            let t = (e * lk).exp();
            acc += (n / t).ln_1p() - n * n * y2 / (t + n);
        }
        -0.5 * acc
    }

    pub fn len(&self) -> usize {
        self.ln_k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_k.is_empty()
    }
}

pub fn marginal_loglik(obs: &NoisyObservation, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return invalid("α must be nonnegative");
    }
    Ok(LogLik::new(obs)?.eval(alpha))
}

/// Crude bound `K·log(1 + n/K^{2α+1})` on the log-determinant part of the
/// truncated tail; `None` when below `1e-9`.
pub fn truncation_tail_bound(n: f64, alpha: f64, k_max: usize) -> Option<f64> {
    let k = k_max as f64;
    let b = k * (n / k.powf(2.0 * alpha + 1.0)).ln_1p();
    (b > 1e-9).then_some(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalBayesResult {
    pub alpha_hat: f64,
    pub alpha_min: f64,
    pub a_n: f64,
    /// Coarse-grid curve `(α, ℓₙ(α))`.
    pub curve_alpha: Vec<f64>,
    pub curve_loglik: Vec<f64>,
    pub loglik_at_hat: f64,
    pub boundary_flag: bool,
    pub tail_bound: Option<f64>,
}

/// `α̂ₙ = argmax ℓₙ` over `[0.01, a_n]`.
pub fn empirical_bayes_alpha(obs: &NoisyObservation) -> Result<EmpiricalBayesResult> {
    empirical_bayes_alpha_in(obs, ALPHA_MIN, search_upper(obs.n))
}

/// Maximises `ℓₙ` over `[lo, hi]`: 400-point grid, then golden-section
/// refinement around the best grid point. Ties go to the smallest `α`.
pub fn empirical_bayes_alpha_in(
    obs: &NoisyObservation,
    lo: f64,
    hi: f64,
) -> Result<EmpiricalBayesResult> {
    if !(lo >= 0.0 && hi > lo) {
        return invalid("search box must satisfy 0 ≤ lo < hi");
    }
    let ll = LogLik::new(obs)?;
    let (alpha_hat, value, curve_alpha, curve_loglik) = maximize(|a| ll.eval(a), lo, hi);
    let boundary_flag = (alpha_hat - lo).abs() <= EB_TOL || (hi - alpha_hat).abs() <= EB_TOL;
    Ok(EmpiricalBayesResult {
        alpha_hat,
        alpha_min: lo,
        a_n: hi,
        curve_alpha,
        curve_loglik,
        loglik_at_hat: value,
        boundary_flag,
        tail_bound: truncation_tail_bound(obs.n, alpha_hat, ll.len()),
    })
}

/// Grid-then-golden-section maximiser shared with tests.
pub(crate) fn maximize(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64, Vec<f64>, Vec<f64>) {
    let step = (hi - lo) / (EB_GRID - 1) as f64;
    let grid: Vec<f64> = (0..EB_GRID).map(|i| lo + step * i as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&a| f(a)).collect();
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[best] {
            best = i;
        }
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(EB_GRID - 1)];
    let (g_arg, g_val) = golden(&f, a, b, EB_TOL);
    // Keep the grid point unless refinement strictly improves on it.
    let (arg, val) = if g_val > vals[best] {
        (g_arg, g_val)
    } else {
        (grid[best], vals[best])
    };
    (arg, val, grid, vals)
}

fn golden(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        // `>=` keeps the left bracket on ties.
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Hyperprior densities on `α > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperprior {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    InverseGamma { shape: f64, rate: f64 },
}

impl Default for Hyperprior {
    fn default() -> Self {
        Hyperprior::Exponential { rate: 1.0 }
    }
}

/// Constants `(c₂, c₃, c₄)` of the two-sided bound
/// `c₄⁻¹ α^{-c₃} e^{-c₂α} ≤ λ(α) ≤ c₄ α^{-c₃} e^{-c₂α}` for `α ≥ c₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperpriorBounds {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl Hyperprior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Hyperprior::Exponential { rate } => rate > 0.0,
            Hyperprior::Gamma { shape, rate } | Hyperprior::InverseGamma { shape, rate } => {
                shape > 0.0 && rate > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            invalid("hyperprior parameters must be positive")
        }
    }

    pub fn log_density(&self, alpha: f64) -> f64 {
        if alpha <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            Hyperprior::Exponential { rate } => rate.ln() - rate * alpha,
            Hyperprior::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * alpha.ln() - rate * alpha
            }
            Hyperprior::InverseGamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) - (shape + 1.0) * alpha.ln() - rate / alpha
            }
        }
    }

    /// Bound constants valid for `α ≥ c1`.
    pub fn bounds(&self, c1: f64) -> HyperpriorBounds {
        match *self {
            Hyperprior::Exponential { rate } => HyperpriorBounds {
                c1,
                c2: rate,
                c3: 0.0,
                c4: rate.max(1.0 / rate),
            },
            Hyperprior::Gamma { shape, rate } => {
                let c = (shape * rate.ln() - ln_gamma(shape)).exp();
                HyperpriorBounds {
                    c1,
                    c2: rate,
                    c3: 1.0 - shape,
                    c4: c.max(1.0 / c),
                }
            }
            Hyperprior::InverseGamma { shape, rate } => {
                let c = (shape * rate.ln() - ln_gamma(shape)).exp();
                let lower = c * (-rate / c1).exp();
                HyperpriorBounds {
                    c1,
                    c2: 0.0,
                    c3: shape + 1.0,
                    c4: c.max(1.0 / lower),
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Hyperprior::Exponential { rate } => format!("exponential(rate={rate})"),
            Hyperprior::Gamma { shape, rate } => format!("gamma(shape={shape},rate={rate})"),
            Hyperprior::InverseGamma { shape, rate } => {
                format!("inverse_gamma(shape={shape},rate={rate})")
            }
        }
    }
}

/// Marginal posterior of `α` on a quadrature grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPosterior {
    pub grid: Vec<f64>,
    /// Normalised log masses; `Σ exp = 1`.
    pub log_weights: Vec<f64>,
    pub hyperprior: Hyperprior,
    pub bounds: HyperpriorBounds,
}

impl HyperPosterior {
    /// Normalises arbitrary log masses on an increasing grid.
    pub fn from_log_masses(
        grid: Vec<f64>,
        log_masses: Vec<f64>,
        hyperprior: Hyperprior,
    ) -> Result<Self> {
        if grid.len() < 2 || grid.len() != log_masses.len() {
            return invalid("degenerate hyperposterior grid");
        }
        if grid.windows(2).any(|p| !(p[1] > p[0])) {
            return invalid("hyperposterior grid must be strictly increasing");
        }
        let mx = log_masses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !mx.is_finite() {
            return invalid("hyperposterior has no finite mass");
        }
        let lse = mx + log_masses.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        let log_weights = log_masses.iter().map(|v| v - lse).collect();
        let bounds = hyperprior.bounds(grid[0]);
        Ok(Self {
            grid,
            log_weights,
            hyperprior,
            bounds,
        })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|v| v.exp()).collect()
    }

    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = self
            .weights()
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    /// Posterior mean of `α` on the grid.
    pub fn mean(&self) -> f64 {
        self.grid
            .iter()
            .zip(self.weights())
            .map(|(a, w)| a * w)
            .sum()
    }
}

/// Geometric spacing on `[lo, mid]` followed by uniform spacing on
/// `(mid, hi]`, `mid = min(1, hi/2)` (or the midpoint when `lo ≥ mid`).
pub fn hyper_grid(lo: f64, hi: f64, size: usize) -> Result<Vec<f64>> {
    if size < 4 || !(lo > 0.0 && hi > lo) {
        return invalid("hyperposterior grid needs at least 4 points on 0 < lo < hi");
    }
    let mut mid = 1f64.min(hi / 2.0);
    if mid <= lo {
        mid = 0.5 * (lo + hi);
    }
    let g1 = size / 2;
    let g2 = size - g1;
    let ratio = (mid / lo).powf(1.0 / (g1 - 1) as f64);
    let mut grid: Vec<f64> = (0..g1).map(|i| lo * ratio.powi(i as i32)).collect();
    grid[g1 - 1] = mid;
    let step = (hi - mid) / g2 as f64;
    grid.extend((1..=g2).map(|i| mid + step * i as f64));
    Ok(grid)
}

/// Midpoint-rule cell widths of a grid.
pub fn cell_widths(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|i| {
            let left = if i == 0 {
                grid[0]
            } else {
                0.5 * (grid[i - 1] + grid[i])
            };
            let right = if i + 1 == n {
                grid[n - 1]
            } else {
                0.5 * (grid[i] + grid[i + 1])
            };
            right - left
        })
        .collect()
}

/// `λₙ(α | Y) ∝ λ(α) exp(ℓₙ(α))` on the default grid over `[0.01, a_n]`.
/// Log masses include the cell width so that uneven spacing integrates
/// correctly.
pub fn hierarchical_marginal(
    obs: &NoisyObservation,
    hyperprior: Hyperprior,
    grid_size: usize,
) -> Result<HyperPosterior> {
    let grid = hyper_grid(ALPHA_MIN, search_upper(obs.n), grid_size)?;
    hierarchical_marginal_on_grid(obs, hyperprior, grid)
}

pub fn hierarchical_marginal_on_grid(
    obs: &NoisyObservation,
    hyperprior: Hyperprior,
    grid: Vec<f64>,
) -> Result<HyperPosterior> {
    hyperprior.validate()?;
    let ll = LogLik::new(obs)?;
    let widths = cell_widths(&grid);
    let log_masses: Vec<f64> = grid
        .iter()
        .zip(&widths)
        .map(|(&a, &w)| hyperprior.log_density(a) + ll.eval(a) + w.ln())
        .collect();
    HyperPosterior::from_log_masses(grid, log_masses, hyperprior)
}

/// Smallest grid `α` whose cumulative weight reaches 1/2.
pub fn hierarchical_median(hp: &HyperPosterior) -> f64 {
    let cdf = hp.cdf();
    let idx = cdf
        .iter()
        .position(|&c| c + 1e-12 >= 0.5)
        .unwrap_or(cdf.len() - 1);
    hp.grid[idx]
}

/// Draws `α` from the grid law (inverse CDF), then `f | α, Y`.
pub fn sample_hierarchical(
    hp: &HyperPosterior,
    obs: &NoisyObservation,
    m: usize,
    seed: u64,
) -> Result<PosteriorDrawSet> {
    require_sequence(obs)?;
    if m == 0 {
        return invalid("need at least one draw");
    }
    let sampler = Sampler::Hierarchical {
        alphas: hp.grid.clone(),
        cdf: hp.cdf(),
        y: obs.y.clone(),
        n: obs.n,
    };
    let provenance = Provenance {
        prior: "gaussian_hierarchical".into(),
        hyper: hp.hyperprior.label(),
        n: obs.n,
        seed,
    };
    Ok(PosteriorDrawSet::new(
        obs.signal_basis,
        m,
        seed,
        provenance,
        sampler,
    ))
}

/// Coordinate means of the hierarchical posterior, `Σ_α w(α) μ_k(α)`.
pub fn hierarchical_mean(hp: &HyperPosterior, obs: &NoisyObservation) -> Vec<f64> {
    let mut out = vec![0.0; obs.y.len()];
    for (a, w) in hp.grid.iter().zip(hp.weights()) {
        if w < 1e-300 {
            continue;
        }
        let e = 2.0 * a + 1.0;
        for (k, (o, y)) in out.iter_mut().zip(&obs.y).enumerate() {
            let t = ((k + 1) as f64).powf(e);
            *o += w * obs.n * y / (t + obs.n);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlDiagnostic {
    /// KL of the rescaled projected posterior from `N(0, I_J)`.
    pub kl: f64,
    /// `(1/2n) Σ_{k≤J} [k^{2α+1} + k^{4α+2} Y_k²]`.
    pub bound: f64,
    /// `(J^{2α+2} + J^{4α+3} max_{k≤J} Y_k²)/n`.
    pub coarse_bound: f64,
}

/// Exact KL between the law of `√n(f - Y)` on the first `J` coordinates
/// under `Π_α(·|Y)` and the standard normal: per coordinate
/// `½[σ² + μ² - 1 - log σ²]` with `σ² = n/(t+n)`, `μ = -√n t Y/(t+n)`,
/// `t = k^{2α+1}`.
pub fn kl_projection_diagnostic(
    obs: &NoisyObservation,
    alpha: f64,
    j: usize,
) -> Result<KlDiagnostic> {
    require_sequence(obs)?;
    if j == 0 || j > obs.y.len() {
        return invalid("J must lie in 1..=K");
    }
    if !(alpha >= 0.0) {
        return invalid("α must be nonnegative");
    }
    let n = obs.n;
    let e = 2.0 * alpha + 1.0;
    let mut kl = 0.0;
    let mut bound = 0.0;
    let mut max_y2: f64 = 0.0;
    for (i, y) in obs.y[..j].iter().enumerate() {
        let t = ((i + 1) as f64).powf(e);
        let s2 = n / (t + n);
        let mu = -n.sqrt() * t * y / (t + n);
        // s2 - 1 - ln s2 = ln(1 + t/n) - t/(t+n), written to avoid cancellation.
        let var_part = (t / n).ln_1p() - t / (t + n);
        kl += 0.5 * (var_part + mu * mu);
        bound += t + t * t * y * y;
        max_y2 = max_y2.max(y * y);
        debug_assert!(s2 > 0.0);
    }
    let jf = j as f64;
    Ok(KlDiagnostic {
        kl,
        bound: bound / (2.0 * n),
        coarse_bound: (jf.powf(2.0 * alpha + 2.0) + jf.powf(4.0 * alpha + 3.0) * max_y2) / n,
    })
}
