//! Histogram prior with Dirichlet(1,…,1) bin probabilities for density
//! estimation on `[0,1]`, with the truncated Laplace density as truth.
//! Bins are `I_{Lk} = (k2^{-L}, (k+1)2^{-L}]`; the point 0 goes to bin 0.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::draws::{PosteriorDrawSet, Provenance};
use crate::error::{invalid, Error, Result};
use crate::rng::{rng_from_seed, stream_rng};
use crate::seqmodel::{haar_forward, BasisSpec, TruncatedLaplace};

/// Location and decay rate of the default truth `∝ exp(-5|x - 1/2|)`.
pub const LAPLACE_LOC: f64 = 0.5;
pub const LAPLACE_RATE: f64 = 5.0;
/// Nominal Sobolev smoothness used to pick the resolution.
pub const NOMINAL_SMOOTHNESS: f64 = 1.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramModel {
    /// `2^level` bins.
    pub level: usize,
}

impl HistogramModel {
    pub fn new(level: usize) -> Result<Self> {
        if level == 0 || level > 24 {
            return invalid("histogram level must lie in 1..=24");
        }
        Ok(Self { level })
    }

    /// `2^{L_n} ≈ (n/log n)^{1/(2s+1)}` with `s = 1.4`, rounded to the
    /// nearest power of two (at least 2 bins).
    pub fn default_for(n: usize) -> Self {
        let nf = n.max(3) as f64;
        let target = (nf / nf.ln()).powf(1.0 / (2.0 * NOMINAL_SMOOTHNESS + 1.0));
        let lo = target.log2().floor().max(0.0) as i32;
        let (a, b) = (2f64.powi(lo), 2f64.powi(lo + 1));
        let level = if target - a <= b - target { lo } else { lo + 1 };
        Self {
            level: level.max(1) as usize,
        }
    }

    pub fn bins(&self) -> usize {
        1 << self.level
    }

    /// Haar basis holding the exact coefficients of a histogram (levels up
    /// to `L - 1`).
    pub fn basis(&self) -> BasisSpec {
        BasisSpec::haar(self.level - 1).expect("level ≥ 1")
    }
}

/// Exact inverse-CDF sampling from the truncated Laplace density.
pub fn sample_iid_laplace(n: usize, seed: u64) -> Result<Vec<f64>> {
    sample_iid(&TruncatedLaplace::new(LAPLACE_LOC, LAPLACE_RATE)?, n, seed)
}

pub fn sample_iid(dist: &TruncatedLaplace, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return invalid("need at least one sample");
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..n).map(|_| dist.quantile(rng.random::<f64>())).collect())
}

pub fn bin_counts(samples: &[f64], level: usize) -> Result<Vec<u64>> {
    let bins = 1usize << level;
    let mut counts = vec![0u64; bins];
    for &x in samples {
        if !(0.0..=1.0).contains(&x) {
            return invalid("samples must lie in [0,1]");
        }
        let idx = ((x * bins as f64).ceil() as usize)
            .saturating_sub(1)
            .min(bins - 1);
        counts[idx] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPosterior {
    pub concentrations: Vec<f64>,
    pub sample_size: u64,
}

/// Conjugate update `D(1 + N_1, …, 1 + N_{2^L})`.
pub fn posterior(counts: &[u64]) -> Result<DirichletPosterior> {
    if !counts.len().is_power_of_two() || counts.len() < 2 {
        return invalid("number of bins must be a power of two ≥ 2");
    }
    Ok(DirichletPosterior {
        concentrations: counts.iter().map(|&c| 1.0 + c as f64).collect(),
        sample_size: counts.iter().sum(),
    })
}

impl DirichletPosterior {
    pub fn level(&self) -> usize {
        self.concentrations.len().trailing_zeros() as usize
    }

    /// Posterior mean bin probabilities `(1 + N_k)/(2^L + n)`.
    pub fn mean_probabilities(&self) -> Vec<f64> {
        let total: f64 = self.concentrations.iter().sum();
        self.concentrations.iter().map(|a| a / total).collect()
    }

    /// Bin probabilities of `m` independent posterior draws.
    pub fn sample_probabilities(&self, m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let gammas = self
            .concentrations
            .iter()
            .map(|&a| Gamma::new(a, 1.0).map_err(|e| Error::InvalidParameter(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..m)
            .map(|i| {
                let mut rng = stream_rng(seed, i as u64);
                let mut g: Vec<f64> = gammas.iter().map(|d| d.sample(&mut rng)).collect();
                let s: f64 = g.iter().sum();
                for v in &mut g {
                    *v /= s;
                }
                g
            })
            .collect())
    }

    /// Posterior draws as exact Haar coefficient arrays of the histogram
    /// densities.
    pub fn sample(&self, m: usize, seed: u64) -> Result<PosteriorDrawSet> {
        if m == 0 {
            return invalid("need at least one draw");
        }
        let level = self.level();
        let rows = self
            .sample_probabilities(m, seed)?
            .iter()
            .map(|p| haar_coefficients(p, level))
            .collect::<Result<Vec<_>>>()?;
        let provenance = Provenance {
            prior: "dirichlet_histogram".into(),
            hyper: format!("L={level}"),
            n: self.sample_size as f64,
            seed,
        };
        Ok(PosteriorDrawSet::from_rows(
            HistogramModel { level }.basis(),
            rows,
            provenance,
        ))
    }
}

/// Histogram density values `2^L h_k` on the bins.
pub fn histogram_heights(probabilities: &[f64]) -> Vec<f64> {
    let bins = probabilities.len() as f64;
    probabilities.iter().map(|p| p * bins).collect()
}

/// Exact Haar coefficients (levels `0..L-1`) of the density
/// `2^L Σ h_k 1_{I_{Lk}}`, with `ψ = +1` on the left half.
pub fn haar_coefficients(probabilities: &[f64], level: usize) -> Result<Vec<f64>> {
    if probabilities.len() != 1usize << level || level == 0 {
        return Err(Error::BasisMismatch(format!(
            "expected {} bin probabilities, got {}",
            1usize << level,
            probabilities.len()
        )));
    }
    Ok(haar_forward(&histogram_heights(probabilities)))
}

/// Exact Haar coefficients of the truncated Laplace truth up to level
/// `L - 1` (the span of the histogram).
pub fn truth_coefficients(level: usize) -> Result<Vec<f64>> {
    let d = TruncatedLaplace::new(LAPLACE_LOC, LAPLACE_RATE)?;
    Ok(d.haar_coefficients(level - 1))
}
