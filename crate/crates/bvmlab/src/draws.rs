//! Posterior draw sets.
//!
//! A draw set stores the sampler and a seed rather than the `M × K` matrix:
//! row `i` is regenerated on demand from its own stream `seed ⊕ i`, so a set
//! of 2000 draws at `K = 2^14` costs a few kilobytes instead of 260 MB and
//! any row can be revisited bit-identically.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::{stream_rng, Rng};
use crate::seqmodel::BasisSpec;

/// Where a draw set came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub prior: String,
    /// `α` for fixed-smoothness sets, the hyperprior label otherwise.
    pub hyper: String,
    pub n: f64,
    pub seed: u64,
}

/// Per-row generator.
#[derive(Debug, Clone)]
pub enum Sampler {
    /// Independent `N(mean_i, sd_i²)` coordinates.
    Gaussian { means: Vec<f64>, sds: Vec<f64> },
    /// Coordinate `i` is `N(mean_i, sd_i²)` with probability `weight_i`
    /// and exactly zero otherwise.
    SpikeSlab {
        weights: Vec<f64>,
        means: Vec<f64>,
        sds: Vec<f64>,
    },
    /// Draw `α` from a discrete law on `alphas`, then the fixed-α
    /// conjugate posterior given `y`.
    Hierarchical {
        alphas: Vec<f64>,
        cdf: Vec<f64>,
        y: Vec<f64>,
        n: f64,
    },
    /// Precomputed rows.
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct PosteriorDrawSet {
    pub basis: BasisSpec,
    pub count: usize,
    pub seed: u64,
    pub provenance: Provenance,
    sampler: Arc<Sampler>,
}

impl PosteriorDrawSet {
    pub fn new(
        basis: BasisSpec,
        count: usize,
        seed: u64,
        provenance: Provenance,
        sampler: Sampler,
    ) -> Self {
        let count = match &sampler {
            Sampler::Rows(rows) => rows.len(),
            _ => count,
        };
        Self {
            basis,
            count,
            seed,
            provenance,
            sampler: Arc::new(sampler),
        }
    }

    pub fn from_rows(basis: BasisSpec, rows: Vec<Vec<f64>>, provenance: Provenance) -> Self {
        let seed = provenance.seed;
        Self::new(basis, rows.len(), seed, provenance, Sampler::Rows(rows))
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn sampler(&self) -> &Sampler {
        &self.sampler
    }

    /// Same sampler, new seed and size (e.g. a fresh evaluation set).
    pub fn resampled(&self, count: usize, seed: u64) -> Self {
        let mut provenance = self.provenance.clone();
        provenance.seed = seed;
        Self {
            basis: self.basis,
            count,
            seed,
            provenance,
            sampler: Arc::clone(&self.sampler),
        }
    }

    /// Writes row `i` into `buf` (length `dim()`).
    pub fn fill_row(&self, i: usize, buf: &mut [f64]) {
        assert!(i < self.count, "row {i} out of range");
        let mut rng = stream_rng(self.seed, i as u64);
        match &*self.sampler {
            Sampler::Gaussian { means, sds } => {
                for ((b, m), s) in buf.iter_mut().zip(means).zip(sds) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *b = m + s * z;
                }
            }
            Sampler::SpikeSlab {
                weights,
                means,
                sds,
            } => {
                for (j, b) in buf.iter_mut().enumerate() {
                    *b = spike_slab_coord(&mut rng, weights[j], means[j], sds[j]);
                }
            }
            Sampler::Hierarchical { alphas, cdf, y, n } => {
                let u: f64 = rng.random();
                let idx = cdf.partition_point(|&c| c < u).min(alphas.len() - 1);
                let e = 2.0 * alphas[idx] + 1.0;
                for (k, (b, yk)) in buf.iter_mut().zip(y).enumerate() {
                    let t = ((k + 1) as f64).powf(e);
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *b = n * yk / (t + n) + z / (t + n).sqrt();
                }
            }
            Sampler::Rows(rows) => buf.copy_from_slice(&rows[i]),
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut buf = vec![0.0; self.dim()];
        self.fill_row(i, &mut buf);
        buf
    }

    /// Applies `f` to every row (in parallel; the output order is the row order).
    pub fn map_rows<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync + Send,
    {
        let dim = self.dim();
        (0..self.count)
            .into_par_iter()
            .map_init(
                || vec![0.0; dim],
                |buf, i| {
                    self.fill_row(i, buf);
                    f(buf)
                },
            )
            .collect()
    }

    pub fn materialize(&self) -> Vec<Vec<f64>> {
        self.map_rows(|r| r.to_vec())
    }

    /// Streams the draws to CSV, one row per draw.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(
            w,
            "# seed={} prior={} n={}",
            self.seed, self.provenance.prior, self.provenance.n
        )?;
        let mut buf = vec![0.0; self.dim()];
        for i in 0..self.count {
            self.fill_row(i, &mut buf);
            let line: Vec<String> = buf.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn spike_slab_coord(rng: &mut Rng, weight: f64, mean: f64, sd: f64) -> f64 {
    if weight >= 1.0 {
        let z: f64 = StandardNormal.sample(rng);
        mean + sd * z
    } else if weight <= 0.0 {
        0.0
    } else {
        let u: f64 = rng.random();
        if u < weight {
            let z: f64 = StandardNormal.sample(rng);
            mean + sd * z
        } else {
            0.0
        }
    }
}
