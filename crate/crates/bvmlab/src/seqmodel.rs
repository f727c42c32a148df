//! Bases, signals, norms, self-similarity checks and synthetic data for the
//! Gaussian sequence model `Y_λ = f_λ + Z_λ/√n`.
//!
//! Fourier-type arrays are indexed by `k = 1..=K` and stored at position
//! `k - 1`. Haar arrays of resolution `J` have length `2^(J+1)`: position 0
//! holds the scaling coefficient and position `m ≥ 1` holds `(l, k)` with
//! `l = ⌊log₂ m⌋`, `k = m - 2^l`. The mother wavelet is `+1` on the left
//! half of its support and `-1` on the right half.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    FourierSine,
    VolterraSvd,
    HaarWavelet,
}

/// A truncated orthonormal basis of `L²[0,1]`. `max_index` is `K` for the
/// Fourier-type bases and the finest level `J` for Haar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub max_index: usize,
}

impl BasisSpec {
    pub fn new(kind: BasisKind, max_index: usize) -> Result<Self> {
        // Haar level 0 already holds two coefficients (φ and ψ₀₀).
        if max_index == 0 && kind != BasisKind::HaarWavelet {
            return invalid("basis max_index must be at least 1");
        }
        if kind == BasisKind::HaarWavelet && max_index > 26 {
            return invalid("Haar resolution above 26 is not supported");
        }
        Ok(Self { kind, max_index })
    }

    pub fn fourier_sine(k_max: usize) -> Result<Self> {
        Self::new(BasisKind::FourierSine, k_max)
    }

    pub fn volterra_svd(k_max: usize) -> Result<Self> {
        Self::new(BasisKind::VolterraSvd, k_max)
    }

    pub fn haar(j_max: usize) -> Result<Self> {
        Self::new(BasisKind::HaarWavelet, j_max)
    }

    /// Default Fourier truncation `max(2n, 2^14)`.
    pub fn default_fourier_len(n: f64) -> usize {
        ((2.0 * n).ceil() as usize).max(1 << 14)
    }

    /// Default Haar resolution `⌊log₂ n⌋ + 3`.
    pub fn default_haar_level(n: f64) -> usize {
        (n.log2().floor().max(0.0) as usize) + 3
    }

    pub fn is_wavelet(&self) -> bool {
        self.kind == BasisKind::HaarWavelet
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        match self.kind {
            BasisKind::HaarWavelet => 1usize << (self.max_index + 1),
            _ => self.max_index,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Value of the basis function stored at `pos` evaluated at `x`.
    pub fn basis_value(&self, pos: usize, x: f64) -> f64 {
        use std::f64::consts::{PI, SQRT_2};
        match self.kind {
            BasisKind::FourierSine => SQRT_2 * ((pos + 1) as f64 * PI * x).sin(),
            BasisKind::VolterraSvd => SQRT_2 * (((pos + 1) as f64 - 0.5) * PI * x).cos(),
            BasisKind::HaarWavelet => haar_value(pos, x),
        }
    }
}

/// `(l, k)` of Haar position `m`; `None` for the scaling coefficient.
pub fn haar_index(m: usize) -> Option<(usize, usize)> {
    if m == 0 {
        None
    } else {
        let l = (usize::BITS - 1 - m.leading_zeros()) as usize;
        Some((l, m - (1usize << l)))
    }
}

/// Flattened position of wavelet `(l, k)`.
pub fn haar_position(l: usize, k: usize) -> usize {
    debug_assert!(k < (1usize << l));
    (1usize << l) + k
}

/// Level used for level-dependent rules: the scaling coefficient shares
/// level 0 with `ψ₀₀`.
pub fn haar_level(m: usize) -> usize {
    haar_index(m).map_or(0, |(l, _)| l)
}

fn haar_value(m: usize, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    match haar_index(m) {
        None => 1.0,
        Some((l, k)) => {
            // Same half-open cell convention as `haar_cell_values`, with x = 1
            // folded into the last cell.
            let cells = 1usize << (l + 1);
            let idx = ((x * cells as f64) as usize).min(cells - 1);
            if idx / 2 != k {
                0.0
            } else if idx % 2 == 0 {
                ((1u64 << l) as f64).sqrt()
            } else {
                -((1u64 << l) as f64).sqrt()
            }
        }
    }
}

/// Values of a Haar partial sum on the `len` dyadic cells of width `1/len`
/// (fast inverse transform). Exact: the partial sum is constant on each cell.
pub fn haar_cell_values(coeffs: &[f64]) -> Vec<f64> {
    let len = coeffs.len();
    debug_assert!(len.is_power_of_two() && len >= 2);
    let mut cur = vec![coeffs[0]];
    let mut next = Vec::with_capacity(len);
    let mut l = 0usize;
    while cur.len() < len {
        let amp = ((1u64 << l) as f64).sqrt();
        next.clear();
        for (k, &v) in cur.iter().enumerate() {
            let d = amp * coeffs[(1usize << l) + k];
            next.push(v + d);
            next.push(v - d);
        }
        std::mem::swap(&mut cur, &mut next);
        l += 1;
    }
    cur
}

/// Exact Haar coefficients of a piecewise-constant function given by its
/// `2^L` cell values (forward pyramid, inverse of [`haar_cell_values`]).
pub fn haar_forward(cells: &[f64]) -> Vec<f64> {
    let len = cells.len();
    debug_assert!(len.is_power_of_two() && len >= 2);
    let mut out = vec![0.0; len];
    // Cell averages at the current level, starting at the finest.
    let mut avg: Vec<f64> = cells.to_vec();
    let mut level = len.trailing_zeros() as usize;
    while level > 0 {
        let l = level - 1;
        let half = avg.len() / 2;
        let amp = ((1u64 << l) as f64).sqrt();
        let mut coarse = Vec::with_capacity(half);
        for k in 0..half {
            let (a, b) = (avg[2 * k], avg[2 * k + 1]);
            // ⟨f, ψ_lk⟩ = 2^{l/2} (∫left − ∫right) with cell width 2^{-(l+1)}.
            out[(1usize << l) + k] = amp * (a - b) / (2.0 * (1u64 << l) as f64);
            coarse.push(0.5 * (a + b));
        }
        avg = coarse;
        level = l;
    }
    out[0] = avg[0];
    out
}

/// A truncated coefficient array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalCoefficients {
    pub basis: BasisSpec,
    pub coeffs: Vec<f64>,
    pub declared_beta: Option<f64>,
}

impl SignalCoefficients {
    pub fn new(basis: BasisSpec, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::BasisMismatch(format!(
                "coefficient length {} does not match basis length {}",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(Self {
            basis,
            coeffs,
            declared_beta: None,
        })
    }

    pub fn zeros(basis: BasisSpec) -> Self {
        Self {
            basis,
            coeffs: vec![0.0; basis.len()],
            declared_beta: None,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.declared_beta = Some(beta);
        self
    }
}

/// One entry of the spike subsequence: Haar position `m` and the noise
/// level `n_m` at which it is tuned to sit just below the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeTerm {
    pub position: usize,
    pub n: f64,
}

/// Counterexample signal: coefficient `r·√(log n_m / n_m)` at each
/// subsequence position and `R·2^{-l(β+1/2)}` at the reserved index
/// `(l, 0)` of every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderSpike {
    pub beta: f64,
    pub radius: f64,
    pub r: f64,
    pub subsequence: Vec<SpikeTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalRecipe {
    /// `f_k = k^{-a} sin(bk)`.
    PowerSine {
        a: f64,
        b: f64,
    },
    /// Density proportional to `exp(-scale·|x - loc|)` on `[0,1]`.
    TruncatedLaplace {
        loc: f64,
        scale: f64,
    },
    HolderSpike(HolderSpike),
    Custom(Vec<f64>),
}

/// Normalised density `∝ exp(-rate·|x - loc|)` on `[0,1]` with closed-form
/// CDF and quantile function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedLaplace {
    pub loc: f64,
    pub rate: f64,
    norm: f64,
}

impl TruncatedLaplace {
    pub fn new(loc: f64, rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&loc) {
            return invalid("Laplace location must lie in [0,1]");
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return invalid("Laplace scale must be positive");
        }
        let norm = (2.0 - (-rate * loc).exp() - (-rate * (1.0 - loc)).exp()) / rate;
        Ok(Self { loc, rate, norm })
    }

    pub fn density(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        (-self.rate * (x - self.loc).abs()).exp() / self.norm
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (a, c) = (self.rate, self.loc);
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let left_mass = (1.0 - (-a * c).exp()) / a;
        let raw = if x <= c {
            ((-a * (c - x)).exp() - (-a * c).exp()) / a
        } else {
            left_mass + (1.0 - (-a * (x - c)).exp()) / a
        };
        raw / self.norm
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let (a, c) = (self.rate, self.loc);
        let u = u.clamp(0.0, 1.0);
        let target = u * self.norm;
        let left_mass = (1.0 - (-a * c).exp()) / a;
        let x = if target <= left_mass {
            c + (a * target + (-a * c).exp()).ln() / a
        } else {
            c - (1.0 - a * (target - left_mass)).ln() / a
        };
        x.clamp(0.0, 1.0)
    }

    /// Exact Haar coefficients up to resolution `j_max` via CDF differences.
    pub fn haar_coefficients(&self, j_max: usize) -> Vec<f64> {
        let len = 1usize << (j_max + 1);
        let mut out = vec![0.0; len];
        out[0] = 1.0;
        for (m, slot) in out.iter_mut().enumerate().skip(1) {
            let (l, k) = haar_index(m).expect("wavelet position");
            let width = 1.0 / (1u64 << l) as f64;
            let a = k as f64 * width;
            let mid = a + 0.5 * width;
            let b = a + width;
            let (fa, fm, fb) = (self.cdf(a), self.cdf(mid), self.cdf(b));
            *slot = ((1u64 << l) as f64).sqrt() * ((fm - fa) - (fb - fm));
        }
        out
    }
}

/// Builds the coefficient array of a recipe on the given basis.
pub fn synthesize_signal(recipe: &SignalRecipe, basis: BasisSpec) -> Result<SignalCoefficients> {
    match recipe {
        SignalRecipe::PowerSine { a, b } => {
            if basis.is_wavelet() {
                return Err(Error::BasisMismatch(
                    "power_sine needs a Fourier-type basis".into(),
                ));
            }
            let coeffs = (1..=basis.len())
                .map(|k| {
                    let k = k as f64;
                    k.powf(-a) * (b * k).sin()
                })
                .collect();
            let mut s = SignalCoefficients::new(basis, coeffs)?;
            if *a > 0.5 {
                s.declared_beta = Some(a - 0.5);
            }
            Ok(s)
        }
        SignalRecipe::TruncatedLaplace { loc, scale } => {
            if !basis.is_wavelet() {
                return Err(Error::BasisMismatch(
                    "truncated_laplace needs the Haar basis".into(),
                ));
            }
            let d = TruncatedLaplace::new(*loc, *scale)?;
            SignalCoefficients::new(basis, d.haar_coefficients(basis.max_index))
        }
        SignalRecipe::HolderSpike(h) => holder_spike(h, basis),
        SignalRecipe::Custom(values) => SignalCoefficients::new(basis, values.clone()),
    }
}

fn holder_spike(h: &HolderSpike, basis: BasisSpec) -> Result<SignalCoefficients> {
    if !basis.is_wavelet() {
        return Err(Error::BasisMismatch(
            "holder_spike needs the Haar basis".into(),
        ));
    }
    if !(h.beta > 0.0) || !(h.radius >= 0.0) || !(h.r >= 0.0) {
        return invalid("holder_spike needs β > 0 and nonnegative R, r");
    }
    let mut coeffs = vec![0.0; basis.len()];
    for l in 0..=basis.max_index {
        coeffs[haar_position(l, 0)] = h.radius * 2f64.powf(-(l as f64) * (h.beta + 0.5));
    }
    for term in &h.subsequence {
        let m = term.position;
        if m == 0 || m >= coeffs.len() {
            return invalid(format!(
                "subsequence position {m} outside the wavelet range"
            ));
        }
        if haar_index(m).map(|(_, k)| k) == Some(0) {
            return invalid(format!("position {m} is a reserved index"));
        }
        if !(term.n > 1.0) {
            return invalid("subsequence noise levels must exceed 1");
        }
        coeffs[m] = h.r * (term.n.ln() / term.n).sqrt();
    }
    Ok(SignalCoefficients::new(basis, coeffs)?.with_beta(h.beta))
}

/// Observation of the sequence model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyObservation {
    pub signal_basis: BasisSpec,
    pub y: Vec<f64>,
    pub n: f64,
    pub seed: u64,
}

/// `y = f₀ + z/√n` with `z` standard normal drawn from `seed`.
pub fn observe(f0: &SignalCoefficients, n: f64, seed: u64) -> Result<NoisyObservation> {
    if !(n > 0.0 && n.is_finite()) {
        return invalid("noise level n must be positive");
    }
    let mut rng = rng_from_seed(seed);
    let s = 1.0 / n.sqrt();
    let y = f0
        .coeffs
        .iter()
        .map(|&f| {
            let z: f64 = StandardNormal.sample(&mut rng);
            f + s * z
        })
        .collect();
    Ok(NoisyObservation {
        signal_basis: f0.basis,
        y,
        n,
        seed,
    })
}

/// Level weights `w_l`, `l = 0..=J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    pub rule: WeightRule,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `w_l = u·l^{1/2+ε}` for `l ≥ 1`, `w₀ = w₁`.
    PowerLaw {
        eps: f64,
        u: f64,
    },
    Explicit,
}

impl WeightSequence {
    pub fn power_law(eps: f64, u: f64, j_max: usize) -> Result<Self> {
        if !(eps > 0.0) {
            return invalid("power-law exponent ε must be positive");
        }
        if !(u >= 1.0) {
            return invalid("power-law factor u must be at least 1");
        }
        let mut values: Vec<f64> = (0..=j_max.max(1))
            .map(|l| u * (l.max(1) as f64).powf(0.5 + eps))
            .collect();
        values[0] = values[1];
        Ok(Self {
            rule: WeightRule::PowerLaw { eps, u },
            values,
        })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("weight sequence must be nonempty");
        }
        if values.iter().any(|&w| !(w >= 1.0)) {
            return invalid("weights must be at least 1");
        }
        if values.windows(2).any(|p| p[1] < p[0]) {
            return invalid("weights must be nondecreasing");
        }
        Ok(Self {
            rule: WeightRule::Explicit,
            values,
        })
    }

    pub fn get(&self, l: usize) -> f64 {
        self.values[l.min(self.values.len() - 1)]
    }

    pub fn max_level(&self) -> usize {
        self.values.len() - 1
    }

    /// `w_l/√l` strictly increasing over the stored levels `l ≥ 1`
    /// (divergence itself cannot be certified on a finite range).
    pub fn is_admissible(&self) -> bool {
        let ratios: Vec<f64> = (1..self.values.len())
            .map(|l| self.values[l] / (l as f64).sqrt())
            .collect();
        ratios.len() >= 2 && ratios.windows(2).all(|p| p[1] > p[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormSpec {
    L2,
    /// `Σ k^{2s} (max(log k, 1))^{-2δ} f_k²`; `s = -1/2` is the H(δ) norm.
    SobolevLog {
        s: f64,
        delta: f64,
    },
    Multiscale(WeightSequence),
    /// Haar partial sum evaluated on `2^grid_level` dyadic midpoints.
    SupNorm {
        grid_level: usize,
    },
}

impl NormSpec {
    pub fn h_delta(delta: f64) -> Self {
        NormSpec::SobolevLog { s: -0.5, delta }
    }

    pub fn sobolev(s: f64) -> Self {
        NormSpec::SobolevLog { s, delta: 0.0 }
    }
}

/// Weights `k^{2s}(max(log k, 1))^{-2δ}` for `k = 1..=len`.
pub fn sobolev_weights(len: usize, s: f64, delta: f64) -> Vec<f64> {
    (1..=len)
        .map(|k| {
            let kf = k as f64;
            let lw = kf.ln().max(1.0);
            (2.0 * s * kf.ln()).exp() * lw.powf(-2.0 * delta)
        })
        .collect()
}

/// A norm compiled against a basis, for repeated evaluation.
#[derive(Debug, Clone)]
pub enum NormKernel {
    /// `√(Σ c_i x_i²)`.
    Quadratic(Vec<f64>),
    /// `max_i |x_i| · c_i` with `c_i = 1/w_{level(i)}`.
    WeightedMax(Vec<f64>),
    /// Sup norm of the Haar partial sum (cells replicated to a finer grid
    /// do not change the value).
    Sup,
}

impl NormKernel {
    pub fn new(basis: &BasisSpec, spec: &NormSpec) -> Result<Self> {
        let len = basis.len();
        match spec {
            NormSpec::L2 => Ok(NormKernel::Quadratic(vec![1.0; len])),
            NormSpec::SobolevLog { s, delta } => {
                if basis.is_wavelet() {
                    return Err(Error::BasisMismatch(
                        "Sobolev norms are defined on Fourier-type indexing".into(),
                    ));
                }
                if *delta < 0.0 {
                    return invalid("δ must be nonnegative");
                }
                Ok(NormKernel::Quadratic(sobolev_weights(len, *s, *delta)))
            }
            NormSpec::Multiscale(w) => {
                if !basis.is_wavelet() {
                    return Err(Error::BasisMismatch(
                        "multiscale norm needs Haar indexing".into(),
                    ));
                }
                if w.max_level() < basis.max_index {
                    return invalid("weight sequence shorter than the basis resolution");
                }
                Ok(NormKernel::WeightedMax(
                    (0..len).map(|m| 1.0 / w.get(haar_level(m))).collect(),
                ))
            }
            NormSpec::SupNorm { grid_level } => {
                if !basis.is_wavelet() {
                    return Err(Error::BasisMismatch("sup norm needs Haar indexing".into()));
                }
                if *grid_level < basis.max_index + 1 {
                    return invalid("sup-norm grid must resolve the finest Haar level");
                }
                Ok(NormKernel::Sup)
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            NormKernel::Quadratic(c) => c.iter().zip(x).map(|(c, v)| c * v * v).sum::<f64>().sqrt(),
            NormKernel::WeightedMax(c) => c
                .iter()
                .zip(x)
                .map(|(c, v)| c * v.abs())
                .fold(0.0, f64::max),
            NormKernel::Sup => haar_cell_values(x).iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// `‖a - b‖` without allocating for the coordinate norms.
    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            NormKernel::Quadratic(c) => c
                .iter()
                .zip(a.iter().zip(b))
                .map(|(c, (u, v))| {
                    let d = u - v;
                    c * d * d
                })
                .sum::<f64>()
                .sqrt(),
            NormKernel::WeightedMax(c) => c
                .iter()
                .zip(a.iter().zip(b))
                .map(|(c, (u, v))| c * (u - v).abs())
                .fold(0.0, f64::max),
            NormKernel::Sup => {
                let d: Vec<f64> = a.iter().zip(b).map(|(u, v)| u - v).collect();
                self.eval(&d)
            }
        }
    }
}

/// Norm of a coefficient array under `spec`.
pub fn norm(x: &[f64], basis: &BasisSpec, spec: &NormSpec) -> Result<f64> {
    if x.len() != basis.len() {
        return Err(Error::BasisMismatch(
            "array length differs from basis length".into(),
        ));
    }
    Ok(NormKernel::new(basis, spec)?.eval(x))
}

/// Outcome of a finite-range self-similarity scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarCheck {
    pub holds: bool,
    /// First `N` (or level `j`) at which the lower bound fails.
    pub first_violation: Option<usize>,
    /// Inclusive range that was checked.
    pub checked_from: usize,
    pub checked_to: usize,
}

/// Block-energy condition `Σ_{k=N}^{⌈ρN⌉} f_k² ≥ εR·N^{-2β}` for
/// `N0 ≤ N ≤ N_max`.
pub fn check_self_similar_l2(
    f: &SignalCoefficients,
    beta: f64,
    r: f64,
    rho: f64,
    eps: f64,
    n0: usize,
    n_max: usize,
) -> Result<SelfSimilarCheck> {
    if f.basis.is_wavelet() {
        return Err(Error::BasisMismatch(
            "L² self-similarity needs Fourier indexing".into(),
        ));
    }
    if !(rho > 1.0) || !(eps > 0.0 && eps < 1.0) || n0 < 2 || n_max < n0 || !(r > 0.0) {
        return invalid("need ρ > 1, ε ∈ (0,1), R > 0 and 2 ≤ N0 ≤ N_max");
    }
    let c = &f.coeffs;
    // prefix[k] = Σ_{i ≤ k} f_i², with prefix[0] = 0 (1-based k).
    let mut prefix = Vec::with_capacity(c.len() + 1);
    prefix.push(0.0);
    for v in c {
        prefix.push(prefix.last().unwrap() + v * v);
    }
    let block = |a: usize, b: usize| -> f64 {
        let lo = (a - 1).min(c.len());
        let hi = b.min(c.len());
        if hi > lo {
            prefix[hi] - prefix[lo]
        } else {
            0.0
        }
    };
    for nn in n0..=n_max {
        let upper = (rho * nn as f64).ceil() as usize;
        let lhs = block(nn, upper);
        if lhs < eps * r * (nn as f64).powf(-2.0 * beta) {
            return Ok(SelfSimilarCheck {
                holds: false,
                first_violation: Some(nn),
                checked_from: n0,
                checked_to: n_max,
            });
        }
    }
    Ok(SelfSimilarCheck {
        holds: true,
        first_violation: None,
        checked_from: n0,
        checked_to: n_max,
    })
}

/// `‖K_j f - f‖_∞` for the Haar array `f`: sup norm of levels above `j`.
pub fn projection_error_sup(coeffs: &[f64], j: usize) -> f64 {
    let mut tail = coeffs.to_vec();
    let keep = (1usize << (j + 1)).min(tail.len());
    for v in &mut tail[..keep] {
        *v = 0.0;
    }
    haar_cell_values(&tail)
        .iter()
        .fold(0.0, |m, v| m.max(v.abs()))
}

/// Sup-norm condition `‖K_j f - f‖_∞ ≥ ε 2^{-jβ}` for `j0 ≤ j ≤ J_max - 1`.
pub fn check_self_similar_sup(
    f: &SignalCoefficients,
    beta: f64,
    eps: f64,
    j0: usize,
) -> Result<SelfSimilarCheck> {
    if !f.basis.is_wavelet() {
        return Err(Error::BasisMismatch(
            "sup self-similarity needs the Haar basis".into(),
        ));
    }
    if j0 < 1 || !(eps > 0.0) || !(beta > 0.0) {
        return invalid("need j0 ≥ 1, ε > 0 and β > 0");
    }
    let j_max = f.basis.max_index;
    let last = j_max.saturating_sub(1);
    for j in j0..=last {
        if projection_error_sup(&f.coeffs, j) < eps * 2f64.powf(-(j as f64) * beta) {
            return Ok(SelfSimilarCheck {
                holds: false,
                first_violation: Some(j),
                checked_from: j0,
                checked_to: last,
            });
        }
    }
    Ok(SelfSimilarCheck {
        holds: j0 <= last,
        first_violation: if j0 <= last { None } else { Some(j0) },
        checked_from: j0,
        checked_to: last,
    })
}

/// Largest `ε` for which [`check_self_similar_sup`] holds from `j0`.
pub fn self_similar_sup_constant(f: &SignalCoefficients, beta: f64, j0: usize) -> f64 {
    let j_max = f.basis.max_index;
    (j0..j_max)
        .map(|j| projection_error_sup(&f.coeffs, j) * 2f64.powf(j as f64 * beta))
        .fold(f64::INFINITY, f64::min)
}

/// Partial sum `Σ f_λ e_λ(x)` at each grid point.
pub fn evaluate_function(f: &SignalCoefficients, grid: &[f64]) -> Result<Vec<f64>> {
    evaluate_coeffs(&f.basis, &f.coeffs, grid)
}

pub fn evaluate_coeffs(basis: &BasisSpec, coeffs: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if grid.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return invalid("grid points must lie in [0,1]");
    }
    if coeffs.len() != basis.len() {
        return Err(Error::BasisMismatch(
            "array length differs from basis length".into(),
        ));
    }
    match basis.kind {
        BasisKind::HaarWavelet => {
            let cells = haar_cell_values(coeffs);
            let len = cells.len();
            Ok(grid
                .iter()
                .map(|&x| cells[((x * len as f64) as usize).min(len - 1)])
                .collect())
        }
        _ => Ok(grid
            .iter()
            .map(|&x| {
                coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(i, c)| c * basis.basis_value(i, x))
                    .sum()
            })
            .collect()),
    }
}

/// `len` equispaced points `(i + 1/2)/len`.
pub fn midpoint_grid(len: usize) -> Vec<f64> {
    (0..len).map(|i| (i as f64 + 0.5) / len as f64).collect()
}
