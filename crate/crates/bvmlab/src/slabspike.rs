//! Slab-and-spike prior on Haar coefficients with a low-resolution threshold
//! `j₀(n)`: levels `≤ j₀` get the slab alone, levels `j₀ < j ≤ Jₙ` get the
//! mixture `(1 - w_{j,n})δ₀ + w_{j,n}·N(0,1)`, higher levels are zero.
//! The posterior factorises over coordinates and is computed in closed form.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::draws::{PosteriorDrawSet, Provenance, Sampler};
use crate::error::{invalid, Error, Result};
use crate::seqmodel::{haar_index, haar_level, BasisSpec, NoisyObservation, WeightSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum J0Rule {
    /// `⌈√(log n)⌉`.
    SqrtLogN,
    /// `⌈(log n)^{1/(2ε+1)}⌉`.
    PowerLog {
        eps: f64,
    },
    Explicit {
        level: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabSpikeConfig {
    pub j0_rule: J0Rule,
    pub tau: f64,
    /// Exponent `K` of the weight floor `n^{-K}`.
    pub k_floor: f64,
}

impl Default for SlabSpikeConfig {
    fn default() -> Self {
        Self {
            j0_rule: J0Rule::SqrtLogN,
            tau: 1.0,
            k_floor: 5.0,
        }
    }
}

impl SlabSpikeConfig {
    /// The fully thresholded prior `Π'` (`j₀ ≡ 0`).
    pub fn full_thresholding(tau: f64, k_floor: f64) -> Self {
        Self {
            j0_rule: J0Rule::Explicit { level: 0 },
            tau,
            k_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.5) {
            return invalid("τ must exceed 1/2");
        }
        if !(self.k_floor > 0.0) {
            return invalid("weight floor exponent K must be positive");
        }
        if let J0Rule::PowerLog { eps } = self.j0_rule {
            if !(eps > 0.0) {
                return invalid("power_log ε must be positive");
            }
        }
        Ok(())
    }

    /// `Jₙ = ⌊log n / log 2⌋`.
    pub fn jn(n: f64) -> usize {
        (n.ln() / std::f64::consts::LN_2).floor().max(0.0) as usize
    }

    /// `j₀(n)`, kept strictly below `Jₙ`.
    pub fn j0(&self, n: f64) -> usize {
        let raw = match self.j0_rule {
            J0Rule::SqrtLogN => n.ln().max(0.0).sqrt().ceil() as usize,
            J0Rule::PowerLog { eps } => {
                n.ln().max(0.0).powf(1.0 / (2.0 * eps + 1.0)).ceil() as usize
            }
            J0Rule::Explicit { level } => level,
        };
        raw.min(Self::jn(n).saturating_sub(1))
    }

    /// `w_{j,n} = min(1/2, max(n^{-K}, 2^{-j(1+τ)}))`.
    pub fn weight(&self, j: usize, n: f64) -> f64 {
        let decay = 2f64.powf(-(j as f64) * (1.0 + self.tau));
        decay.max(n.powf(-self.k_floor)).min(0.5)
    }

    /// First level at which the floor `n^{-K}` takes over from `2^{-j(1+τ)}`.
    pub fn floor_crossover(&self, n: f64) -> f64 {
        self.k_floor * n.log2() / (1.0 + self.tau)
    }
}

/// Posterior of one coordinate: `slab_weight·N(slab_mean, slab_var) +
/// (1 - slab_weight)·δ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinatePosterior {
    pub slab_weight: f64,
    pub slab_mean: f64,
    pub slab_var: f64,
}

impl CoordinatePosterior {
    pub const SPIKE: CoordinatePosterior = CoordinatePosterior {
        slab_weight: 0.0,
        slab_mean: 0.0,
        slab_var: 0.0,
    };

    /// `P(|f - c| < r)` under this coordinate law.
    pub fn prob_within(&self, c: f64, r: f64) -> f64 {
        let spike = if (c.abs()) < r { 1.0 } else { 0.0 };
        if self.slab_weight <= 0.0 {
            return spike;
        }
        let s = self.slab_var.sqrt();
        let slab = if s > 0.0 {
            std_normal_cdf((c + r - self.slab_mean) / s)
                - std_normal_cdf((c - r - self.slab_mean) / s)
        } else if (c - self.slab_mean).abs() < r {
            1.0
        } else {
            0.0
        };
        self.slab_weight * slab + (1.0 - self.slab_weight) * spike
    }

    /// Mixture CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let s = self.slab_var.sqrt();
        let slab = if s > 0.0 {
            std_normal_cdf((x - self.slab_mean) / s)
        } else if x >= self.slab_mean {
            1.0
        } else {
            0.0
        };
        let spike = if x >= 0.0 { 1.0 } else { 0.0 };
        self.slab_weight * slab + (1.0 - self.slab_weight) * spike
    }

    /// Coordinate-wise posterior median; exactly zero when the atom holds
    /// the half-mass point, `F(0⁻) < 1/2 ≤ F(0)`.
    pub fn median(&self) -> f64 {
        let p = self.slab_weight;
        if p <= 0.0 {
            return 0.0;
        }
        let s = self.slab_var.sqrt();
        if p >= 1.0 {
            return self.slab_mean;
        }
        let below = p * std_normal_cdf(-self.slab_mean / s);
        let at = below + (1.0 - p);
        if below < 0.5 && 0.5 <= at {
            return 0.0;
        }
        let q = if below >= 0.5 { 0.5 / p } else { 1.0 - 0.5 / p };
        let closed = if q > 0.0 && q < 1.0 {
            self.slab_mean + s * std_normal_inv(q)
        } else {
            f64::NAN
        };
        if closed.is_finite() && (self.cdf(closed) - 0.5).abs() < 1e-9 {
            closed
        } else {
            self.median_bisect(below >= 0.5)
        }
    }

    fn median_bisect(&self, negative: bool) -> f64 {
        let s = self.slab_var.sqrt().max(1e-300);
        let span = self.slab_mean.abs() + 40.0 * s;
        let (mut lo, mut hi) = if negative { (-span, 0.0) } else { (0.0, span) };
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) >= 0.5 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if negative {
            lo
        } else {
            hi
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub(crate) fn std_normal_inv(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

fn ln_normal_pdf(x: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * x * x / var
}

/// Posterior of one coordinate observed as `y = f + z/√n` under
/// `(1 - w)δ₀ + w·N(0,1)`.
pub fn coordinate_posterior(y: f64, n: f64, w: f64) -> Result<CoordinatePosterior> {
    if !(0.0..=1.0).contains(&w) {
        return invalid("mixture weight must lie in [0,1]");
    }
    if !(n > 0.0) {
        return invalid("n must be positive");
    }
    let slab_mean = n * y / (n + 1.0);
    let slab_var = 1.0 / (n + 1.0);
    let slab_weight = if w == 0.0 {
        0.0
    } else if w == 1.0 {
        1.0
    } else {
        let log_slab = w.ln() + ln_normal_pdf(y, 1.0 + 1.0 / n);
        let log_spike = (1.0 - w).ln() + ln_normal_pdf(y, 1.0 / n);
        1.0 / (1.0 + (log_spike - log_slab).exp())
    };
    Ok(CoordinatePosterior {
        slab_weight,
        slab_mean,
        slab_var,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabSpikePosterior {
    pub config: SlabSpikeConfig,
    pub n: f64,
    pub j0: usize,
    pub jn: usize,
    pub basis: BasisSpec,
    pub coords: Vec<CoordinatePosterior>,
    pub y: Vec<f64>,
    pub source_seed: u64,
}

pub fn posterior(obs: &NoisyObservation, config: &SlabSpikeConfig) -> Result<SlabSpikePosterior> {
    config.validate()?;
    let basis = obs.signal_basis;
    if !basis.is_wavelet() {
        return Err(Error::BasisMismatch(
            "slab-and-spike prior needs the Haar basis".into(),
        ));
    }
    let n = obs.n;
    let jn = SlabSpikeConfig::jn(n);
    if jn < 1 {
        return invalid("n too small: Jₙ must be at least 1");
    }
    if basis.max_index < jn {
        return Err(Error::BasisMismatch(format!(
            "Haar resolution {} below Jₙ = {jn}",
            basis.max_index
        )));
    }
    let j0 = config.j0(n);
    let coords = obs
        .y
        .iter()
        .enumerate()
        .map(|(m, &y)| {
            let l = haar_level(m);
            if l > jn {
                Ok(CoordinatePosterior::SPIKE)
            } else if l <= j0 {
                coordinate_posterior(y, n, 1.0)
            } else {
                coordinate_posterior(y, n, config.weight(l, n))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SlabSpikePosterior {
        config: *config,
        n,
        j0,
        jn,
        basis,
        coords,
        y: obs.y.clone(),
        source_seed: obs.seed,
    })
}

impl SlabSpikePosterior {
    pub fn sample(&self, m: usize, seed: u64) -> Result<PosteriorDrawSet> {
        if m == 0 {
            return invalid("need at least one draw");
        }
        let sampler = Sampler::SpikeSlab {
            weights: self.coords.iter().map(|c| c.slab_weight).collect(),
            means: self.coords.iter().map(|c| c.slab_mean).collect(),
            sds: self.coords.iter().map(|c| c.slab_var.sqrt()).collect(),
        };
        let provenance = Provenance {
            prior: "slab_spike".into(),
            hyper: format!(
                "j0={},tau={},K={}",
                self.j0, self.config.tau, self.config.k_floor
            ),
            n: self.n,
            seed,
        };
        Ok(PosteriorDrawSet::new(
            self.basis, m, seed, provenance, sampler,
        ))
    }

    pub fn posterior_mean(&self) -> Vec<f64> {
        self.coords
            .iter()
            .map(|c| c.slab_weight * c.slab_mean)
            .collect()
    }

    /// Exact `P(‖f - c‖_{M(w)} < radius)` from the product over coordinates.
    pub fn multiscale_ball_mass(&self, center: &[f64], w: &WeightSequence, radius: f64) -> f64 {
        let mut log_p = 0.0;
        for (m, (c, post)) in center.iter().zip(&self.coords).enumerate() {
            let p = post.prob_within(*c, radius * w.get(haar_level(m)));
            if p <= 0.0 {
                return 0.0;
            }
            log_p += p.ln();
        }
        log_p.exp()
    }
}

pub fn sample(post: &SlabSpikePosterior, m: usize, seed: u64) -> Result<PosteriorDrawSet> {
    post.sample(m, seed)
}

/// Posterior median `f̃` and its support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub median_coeffs: Vec<f64>,
    /// Haar positions with `f̃ ≠ 0`, increasing.
    pub support: Vec<usize>,
}

impl ThresholdEstimate {
    pub fn support_levels(&self) -> Vec<(usize, usize)> {
        self.support
            .iter()
            .map(|&m| haar_index(m).unwrap_or((0, 0)))
            .collect()
    }

    pub fn contains(&self, m: usize) -> bool {
        self.support.binary_search(&m).is_ok()
    }
}

pub fn posterior_median(post: &SlabSpikePosterior) -> ThresholdEstimate {
    let median_coeffs: Vec<f64> = post.coords.iter().map(|c| c.median()).collect();
    let support = median_coeffs
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(m, _)| m)
        .collect();
    ThresholdEstimate {
        median_coeffs,
        support,
    }
}

/// `T⁽¹⁾`: `Y` on levels `≤ j₀`, `Y·1{f̃ ≠ 0}` on `(j₀, Jₙ]`, zero above.
/// `T⁽²⁾`: as `T⁽¹⁾` with the posterior mean on levels `≤ j₀`.
pub fn efficient_estimator(
    obs: &NoisyObservation,
    est: &ThresholdEstimate,
    post: &SlabSpikePosterior,
    variant: u8,
) -> Result<Vec<f64>> {
    if variant != 1 && variant != 2 {
        return invalid("efficient estimator variant must be 1 or 2");
    }
    if obs.y.len() != post.coords.len() || est.median_coeffs.len() != post.coords.len() {
        return Err(Error::BasisMismatch("inconsistent estimator inputs".into()));
    }
    Ok(obs
        .y
        .iter()
        .enumerate()
        .map(|(m, &y)| {
            let l = haar_level(m);
            if l <= post.j0 {
                if variant == 1 {
                    y
                } else {
                    post.coords[m].slab_weight * post.coords[m].slab_mean
                }
            } else if l <= post.jn && est.median_coeffs[m] != 0.0 {
                y
            } else {
                0.0
            }
        })
        .collect())
}

/// `π_med(Y)`: `Y` on the median support, zero elsewhere.
pub fn project_on_support(y: &[f64], est: &ThresholdEstimate) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    for &m in &est.support {
        out[m] = y[m];
    }
    out
}
