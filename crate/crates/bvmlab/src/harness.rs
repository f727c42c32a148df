//! Replicated experiments, report types and deterministic output.
//!
//! Every replication draws its seeds from `(master seed, n index, replication
//! index)` only, so results are independent of scheduling and of the order in
//! which replications run.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::credsets::{
    build_set, contains, diameter_estimate, memberships, Byproducts, CenterRule, CredibleSetSpec,
    SetVariant, VnRule,
};
use crate::dirichlethist::{self, HistogramModel};
use crate::draws::PosteriorDrawSet;
use crate::error::{invalid, Error, Result};
use crate::gaussprior::{self, Hyperprior, HB_GRID};
use crate::rng::derive_seed;
use crate::seqmodel::{
    evaluate_coeffs, haar_cell_values, haar_position, midpoint_grid, observe, synthesize_signal,
    BasisSpec, HolderSpike, NoisyObservation, NormKernel, NormSpec, SignalCoefficients,
    SignalRecipe, SpikeTerm, WeightSequence,
};
use crate::slabspike::{self, J0Rule, SlabSpikeConfig};

/// Version stamped into every emitted report.
pub const SCHEMA_VERSION: u32 = 1;
/// Multiscale weights `w_l = l^{1/2+ε}` used by default.
pub const DEFAULT_WEIGHT_EPS: f64 = 0.1;

const PURPOSE_DATA: u64 = 0;
const PURPOSE_CALIBRATION: u64 = 1;
const PURPOSE_FRESH: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Coverage,
    CredibilityTable,
    IndependenceL2,
    IndependenceMultiscale,
    NegativeBvm,
    DirichletDemo,
    RadiusScaling,
    OversmoothingDemo,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Coverage,
        Experiment::CredibilityTable,
        Experiment::IndependenceL2,
        Experiment::IndependenceMultiscale,
        Experiment::NegativeBvm,
        Experiment::DirichletDemo,
        Experiment::RadiusScaling,
        Experiment::OversmoothingDemo,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Coverage => "coverage",
            Experiment::CredibilityTable => "credibility_table",
            Experiment::IndependenceL2 => "independence_l2",
            Experiment::IndependenceMultiscale => "independence_multiscale",
            Experiment::NegativeBvm => "negative_bvm",
            Experiment::DirichletDemo => "dirichlet_demo",
            Experiment::RadiusScaling => "radius_scaling",
            Experiment::OversmoothingDemo => "oversmoothing_demo",
        }
    }

    /// Accepts both the report name and the command-line spelling.
    pub fn parse(s: &str) -> Result<Self> {
        let key = s.trim().replace('-', "_");
        let alias = match key.as_str() {
            "cred_table" => "credibility_table",
            "indep_l2" => "independence_l2",
            "indep_ms" => "independence_multiscale",
            "neg_bvm" => "negative_bvm",
            "dirichlet" => "dirichlet_demo",
            "oversmooth" => "oversmoothing_demo",
            other => other,
        };
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.name() == alias)
            .ok_or_else(|| Error::Parse(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PriorKind {
    EmpiricalBayes,
    Hierarchical { hyperprior: Hyperprior },
    FixedAlpha { alpha: f64 },
    SlabSpike { config: SlabSpikeConfig },
}

impl PriorKind {
    /// `eb`, `hb`, `hb-gamma:a,b`, `hb-invgamma:a,b`, `hb-exp:rate`,
    /// `fixed:α`, `slab-spike`, `slab-spike:j0`, `pi-prime`.
    pub fn parse(s: &str) -> Result<Self> {
        let (head, args) = split_args(s)?;
        let prior = match (head.as_str(), args.as_slice()) {
            ("eb", []) => PriorKind::EmpiricalBayes,
            ("hb", []) => PriorKind::Hierarchical {
                hyperprior: Hyperprior::default(),
            },
            ("hb_exp", [rate]) => PriorKind::Hierarchical {
                hyperprior: Hyperprior::Exponential { rate: *rate },
            },
            ("hb_gamma", [shape, rate]) => PriorKind::Hierarchical {
                hyperprior: Hyperprior::Gamma {
                    shape: *shape,
                    rate: *rate,
                },
            },
            ("hb_invgamma", [shape, rate]) => PriorKind::Hierarchical {
                hyperprior: Hyperprior::InverseGamma {
                    shape: *shape,
                    rate: *rate,
                },
            },
            ("fixed", [alpha]) => PriorKind::FixedAlpha { alpha: *alpha },
            ("slab_spike", []) => PriorKind::SlabSpike {
                config: SlabSpikeConfig::default(),
            },
            ("slab_spike", [level]) if *level >= 0.0 && level.fract() == 0.0 => {
                PriorKind::SlabSpike {
                    config: SlabSpikeConfig {
                        j0_rule: J0Rule::Explicit {
                            level: *level as usize,
                        },
                        ..SlabSpikeConfig::default()
                    },
                }
            }
            ("pi_prime", []) => PriorKind::SlabSpike {
                config: SlabSpikeConfig::full_thresholding(1.0, 5.0),
            },
            _ => return Err(Error::Parse(format!("unknown prior '{s}'"))),
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorKind::Hierarchical { hyperprior } => hyperprior.validate(),
            PriorKind::FixedAlpha { alpha } if !(*alpha >= 0.0) => invalid("α must be nonnegative"),
            PriorKind::SlabSpike { config } => config.validate(),
            _ => Ok(()),
        }
    }

    pub fn is_wavelet(&self) -> bool {
        matches!(self, PriorKind::SlabSpike { .. })
    }
}

/// `power-sine:a,b`, `laplace`, `laplace:loc,rate`, `holder:β,R`.
pub fn parse_signal(s: &str) -> Result<SignalRecipe> {
    let (head, args) = split_args(s)?;
    match (head.as_str(), args.as_slice()) {
        ("power_sine", [a, b]) => Ok(SignalRecipe::PowerSine { a: *a, b: *b }),
        ("laplace", []) => Ok(SignalRecipe::TruncatedLaplace {
            loc: dirichlethist::LAPLACE_LOC,
            scale: dirichlethist::LAPLACE_RATE,
        }),
        ("laplace", [loc, rate]) => Ok(SignalRecipe::TruncatedLaplace {
            loc: *loc,
            scale: *rate,
        }),
        ("holder", [beta, radius]) => Ok(SignalRecipe::HolderSpike(HolderSpike {
            beta: *beta,
            radius: *radius,
            r: 0.0,
            subsequence: Vec::new(),
        })),
        _ => Err(Error::Parse(format!("unknown signal '{s}'"))),
    }
}

fn split_args(s: &str) -> Result<(String, Vec<f64>)> {
    let s = s.trim();
    let (head, rest) = match s.split_once(':') {
        Some((h, r)) => (h, Some(r)),
        None => (s, None),
    };
    let args = match rest {
        Some(r) => r
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number '{v}' in '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    Ok((head.trim().replace('-', "_"), args))
}

/// One stage of the negative-BvM subsequence: the critical coefficient
/// `(level, shift)` carries `r√(log n/n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegBvmStage {
    pub n: f64,
    pub level: usize,
    pub shift: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegBvmConfig {
    pub beta: f64,
    pub radius: f64,
    pub r: f64,
    /// Exponent of the multiscale weights `w_l = l^{1/2+ε}`.
    pub weight_eps: f64,
    /// `τ` shared by `Π'` and the thresholded prior.
    pub tau: f64,
    pub k_floor: f64,
    pub stages: Vec<NegBvmStage>,
}

impl Default for NegBvmConfig {
    fn default() -> Self {
        let stage = |e: u32, shift: usize| NegBvmStage {
            n: 2f64.powi(e as i32),
            level: 1,
            shift,
        };
        Self {
            beta: 1.0,
            radius: 0.1,
            r: 1.0,
            weight_eps: DEFAULT_WEIGHT_EPS,
            tau: 5.0,
            k_floor: 5.0,
            stages: vec![stage(14, 1), stage(17, 1), stage(20, 1)],
        }
    }
}

impl NegBvmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return invalid("negative-BvM subsequence must be nonempty");
        }
        for s in &self.stages {
            if !(s.n > 1.0) || s.level == 0 || s.shift == 0 || s.shift >= 1 << s.level {
                return invalid("stages need n > 1, level ≥ 1 and a nonreserved shift 1..2^level");
            }
        }
        let mut pos: Vec<usize> = self
            .stages
            .iter()
            .map(|s| haar_position(s.level, s.shift))
            .collect();
        pos.sort_unstable();
        pos.dedup();
        if pos.len() > 1 && pos.len() != self.stages.len() {
            return invalid("distinct stages must use distinct positions or all share one");
        }
        SlabSpikeConfig::full_thresholding(self.tau, self.k_floor).validate()
    }

    /// Haar resolution covering `Jₙ` at the largest `n`.
    pub fn resolution(&self) -> usize {
        let n_max = self.stages.iter().map(|s| s.n).fold(0.0, f64::max);
        SlabSpikeConfig::jn(n_max).max(1)
    }

    /// The counterexample signal. Stages sharing a position keep the value
    /// of the stage under study, so one signal is built per stage.
    pub fn signal(&self, stage: usize) -> Result<SignalCoefficients> {
        let basis = BasisSpec::haar(self.resolution())?;
        let mut seen = std::collections::BTreeSet::new();
        let mut subsequence = vec![SpikeTerm {
            position: haar_position(self.stages[stage].level, self.stages[stage].shift),
            n: self.stages[stage].n,
        }];
        seen.insert(subsequence[0].position);
        for s in &self.stages {
            let position = haar_position(s.level, s.shift);
            if seen.insert(position) {
                subsequence.push(SpikeTerm { position, n: s.n });
            }
        }
        synthesize_signal(
            &SignalRecipe::HolderSpike(HolderSpike {
                beta: self.beta,
                radius: self.radius,
                r: self.r,
                subsequence,
            }),
            basis,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub signal: SignalRecipe,
    pub prior: PriorKind,
    pub n: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Calibration draws per replication.
    pub draws: usize,
    /// Fresh evaluation draws per replication.
    pub fresh_draws: usize,
    pub replications: usize,
    pub seed: u64,
    /// Compute diameter estimates (quadratic in the member count).
    pub diameter: bool,
    /// Replications (the first ones) that compute a diameter estimate.
    pub diameter_reps: usize,
    pub set: Option<SetVariant>,
    pub center: Option<CenterRule>,
    pub negative_bvm: NegBvmConfig,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let power_sine = SignalRecipe::PowerSine { a: 1.5, b: 1.0 };
        let holder = SignalRecipe::HolderSpike(HolderSpike {
            beta: 1.0,
            radius: 1.0,
            r: 0.0,
            subsequence: Vec::new(),
        });
        let base = Self {
            experiment,
            signal: power_sine,
            prior: PriorKind::EmpiricalBayes,
            n: vec![2000.0],
            gamma: vec![0.05],
            draws: 1000,
            fresh_draws: 1000,
            replications: 200,
            seed: 20_240_601,
            diameter: false,
            diameter_reps: 20,
            set: None,
            center: None,
            negative_bvm: NegBvmConfig::default(),
            out: None,
        };
        match experiment {
            Experiment::Coverage => base,
            Experiment::CredibilityTable => Self {
                n: vec![500.0, 2000.0],
                gamma: vec![0.05, 0.10, 0.15, 0.20],
                draws: 2000,
                fresh_draws: 2000,
                replications: 20,
                ..base
            },
            Experiment::IndependenceL2 => Self {
                gamma: vec![0.05, 0.20],
                draws: 2000,
                fresh_draws: 2000,
                replications: 20,
                ..base
            },
            Experiment::IndependenceMultiscale => Self {
                signal: holder,
                prior: PriorKind::SlabSpike {
                    config: SlabSpikeConfig::default(),
                },
                gamma: vec![0.05, 0.10],
                replications: 20,
                ..base
            },
            Experiment::NegativeBvm => Self {
                signal: holder,
                prior: PriorKind::SlabSpike {
                    config: SlabSpikeConfig::default(),
                },
                n: NegBvmConfig::default().stages.iter().map(|s| s.n).collect(),
                replications: 20,
                ..base
            },
            Experiment::DirichletDemo => Self {
                signal: SignalRecipe::TruncatedLaplace {
                    loc: dirichlethist::LAPLACE_LOC,
                    scale: dirichlethist::LAPLACE_RATE,
                },
                n: vec![1000.0, 2000.0, 5000.0, 10000.0],
                replications: 100,
                ..base
            },
            Experiment::RadiusScaling => Self {
                prior: PriorKind::FixedAlpha { alpha: 1.0 },
                n: vec![500.0, 2000.0, 8000.0],
                replications: 5,
                diameter: true,
                ..base
            },
            Experiment::OversmoothingDemo => Self {
                prior: PriorKind::FixedAlpha { alpha: 3.0 },
                draws: 500,
                replications: 100,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.gamma.is_empty() {
            return invalid("n and γ lists must be nonempty");
        }
        if self.n.iter().any(|&n| !(n > 1.0 && n.is_finite())) {
            return invalid("every n must exceed 1");
        }
        if self.gamma.iter().any(|&g| !(g > 0.0 && g < 1.0)) {
            return invalid("every γ must lie in (0,1)");
        }
        if self.draws < crate::credsets::MIN_DRAWS
            || self.fresh_draws == 0
            || self.replications == 0
        {
            return invalid(
                "draw and replication counts must be positive (≥ 20 calibration draws)",
            );
        }
        self.prior.validate()?;
        if self.experiment == Experiment::NegativeBvm {
            self.negative_bvm.validate()?;
        }
        Ok(())
    }

    /// Applies one `key = value` setting (config file or command line).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_list = |v: &str| -> Result<Vec<f64>> {
            v.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number '{x}' for {key}")))
                })
                .collect()
        };
        let parse_count = |v: &str| -> Result<usize> {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad count '{v}' for {key}")))
        };
        match key.trim().replace('-', "_").as_str() {
            "experiment" => self.experiment = Experiment::parse(value)?,
            "n" => self.n = parse_list(value)?,
            "gamma" => self.gamma = parse_list(value)?,
            "draws" => self.draws = parse_count(value)?,
            "fresh_draws" => self.fresh_draws = parse_count(value)?,
            "reps" | "replications" => self.replications = parse_count(value)?,
            "seed" => {
                self.seed = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad seed '{value}'")))?
            }
            "prior" => self.prior = PriorKind::parse(value)?,
            "signal" => self.signal = parse_signal(value)?,
            "diameter" => {
                self.diameter = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad boolean '{value}'")))?
            }
            "diameter_reps" => self.diameter_reps = parse_count(value)?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            other => return Err(Error::Parse(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected 'key = value'", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Config from a file; the `experiment` key (if any) picks the defaults.
pub fn load_config(text: &str, fallback: Experiment) -> Result<ExperimentConfig> {
    let map = parse_config_text(text)?;
    let experiment = match map.get("experiment") {
        Some(e) => Experiment::parse(e)?,
        None => fallback,
    };
    let mut cfg = ExperimentConfig::defaults(experiment);
    for (k, v) in &map {
        if k != "experiment" {
            cfg.apply(k, v)?;
        }
    }
    Ok(cfg)
}

/// Seed of replication `rep` at position `n_index` of the `n` list.
pub fn replication_seed(master: u64, n_index: usize, rep: usize) -> u64 {
    derive_seed(derive_seed(master, n_index as u64), rep as u64)
}

/// Normal-approximation 95% half-width `1.96√(p(1-p)/reps)`.
pub fn ci_half_width(p: f64, reps: usize) -> f64 {
    1.96 * (p * (1.0 - p) / reps.max(1) as f64).sqrt()
}

pub fn basis_for(signal: &SignalRecipe, n: f64) -> Result<BasisSpec> {
    match signal {
        SignalRecipe::PowerSine { .. } => {
            BasisSpec::fourier_sine(BasisSpec::default_fourier_len(n))
        }
        SignalRecipe::Custom(v) => BasisSpec::fourier_sine(v.len()),
        _ => BasisSpec::haar(BasisSpec::default_haar_level(n)),
    }
}

/// A fitted posterior with calibration draws and set byproducts.
#[derive(Debug, Clone)]
pub struct Fit {
    pub draws: PosteriorDrawSet,
    pub by: Byproducts,
    /// `α̂ₙ`, `α_M` or the fixed `α`.
    pub alpha: Option<f64>,
}

pub fn fit_prior(prior: &PriorKind, obs: &NoisyObservation, m: usize, seed: u64) -> Result<Fit> {
    let mut by = Byproducts {
        n: obs.n,
        y: obs.y.clone(),
        ..Byproducts::default()
    };
    match prior {
        PriorKind::EmpiricalBayes => {
            let eb = gaussprior::empirical_bayes_alpha(obs)?;
            let post = gaussprior::posterior(obs, eb.alpha_hat)?;
            by.posterior_mean = Some(post.posterior_mean());
            by.alpha_hat = Some(eb.alpha_hat);
            Ok(Fit {
                draws: post.sample(m, seed)?,
                by,
                alpha: Some(eb.alpha_hat),
            })
        }
        PriorKind::Hierarchical { hyperprior } => {
            let hp = gaussprior::hierarchical_marginal(obs, *hyperprior, HB_GRID)?;
            let median = gaussprior::hierarchical_median(&hp);
            by.posterior_mean = Some(gaussprior::hierarchical_mean(&hp, obs));
            by.alpha_median = Some(median);
            Ok(Fit {
                draws: gaussprior::sample_hierarchical(&hp, obs, m, seed)?,
                by,
                alpha: Some(median),
            })
        }
        PriorKind::FixedAlpha { alpha } => {
            let post = gaussprior::posterior(obs, *alpha)?;
            by.posterior_mean = Some(post.posterior_mean());
            Ok(Fit {
                draws: post.sample(m, seed)?,
                by,
                alpha: Some(*alpha),
            })
        }
        PriorKind::SlabSpike { config } => {
            let post = slabspike::posterior(obs, config)?;
            let est = slabspike::posterior_median(&post);
            by.posterior_mean = Some(post.posterior_mean());
            by.efficient = Some(slabspike::efficient_estimator(obs, &est, &post, 1)?);
            by.jn = Some(post.jn);
            by.threshold = Some(est);
            Ok(Fit {
                draws: post.sample(m, seed)?,
                by,
                alpha: None,
            })
        }
    }
}

/// Default set for a prior: `C̃ₙ`, `C̃'ₙ`, the ℓ₂ ball around the posterior
/// mean, or `D̄ₙ`.
pub fn default_set(prior: &PriorKind, basis: &BasisSpec) -> Result<(SetVariant, CenterRule)> {
    Ok(match prior {
        PriorKind::EmpiricalBayes => (SetVariant::eb_default(), CenterRule::ShiftEstimatorY),
        PriorKind::Hierarchical { .. } => (SetVariant::hb_default(), CenterRule::ShiftEstimatorY),
        PriorKind::FixedAlpha { .. } => (SetVariant::L2Ball, CenterRule::PosteriorMean),
        PriorKind::SlabSpike { .. } => (
            SetVariant::MultiscaleBand {
                w: WeightSequence::power_law(DEFAULT_WEIGHT_EPS, 1.0, basis.max_index)?,
                vn: VnRule::QuarterLog,
            },
            CenterRule::ShiftEstimatorY,
        ),
    })
}

fn diameter_norm(basis: &BasisSpec) -> NormSpec {
    if basis.is_wavelet() {
        NormSpec::SupNorm {
            grid_level: basis.max_index + 1,
        }
    } else {
        NormSpec::L2
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn mean_opt(xs: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = xs.iter().flatten().copied().collect();
    (!v.is_empty()).then(|| mean(&v))
}

// ---------------------------------------------------------------- reports

/// A versioned, seed-stamped table of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<R> {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub rows: Vec<R>,
}

impl<R> Report<R> {
    pub fn new(experiment: &str, seed: u64, rows: Vec<R>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            seed,
            rows,
        }
    }
}

/// Columns: `n, gamma, replications, failures, coverage, ci_half_width,
/// mean_radius, mean_diameter, mean_alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub n: f64,
    pub gamma: f64,
    pub replications: usize,
    pub failures: usize,
    pub coverage: f64,
    pub ci_half_width: f64,
    pub mean_radius: f64,
    pub mean_diameter: Option<f64>,
    pub mean_alpha: Option<f64>,
}

/// Columns: `n, gamma, replications, cred_a, cred_b, joint, product,
/// expected, tv, joint_ci_half_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceRow {
    pub n: f64,
    pub gamma: f64,
    pub replications: usize,
    pub cred_a: f64,
    pub cred_b: f64,
    pub joint: f64,
    pub product: f64,
    pub expected: f64,
    pub tv: f64,
    pub joint_ci_half_width: f64,
}

/// Columns: `n, replications, mean_l2_radius, mean_diameter, mean_alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: f64,
    pub replications: usize,
    pub mean_l2_radius: f64,
    pub mean_diameter: Option<f64>,
    pub mean_alpha: Option<f64>,
}

/// Columns: `stage, n, level, position, m_n, replications,
/// escaping_pi_prime, escaping_thresholded, self_similar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegBvmRow {
    pub stage: usize,
    pub n: f64,
    pub level: usize,
    pub position: usize,
    pub m_n: f64,
    pub replications: usize,
    pub escaping_pi_prime: f64,
    pub escaping_thresholded: f64,
    pub self_similar: bool,
}

/// Columns: `n, level, replications, coverage, ci_half_width, mean_radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletRow {
    pub n: f64,
    pub level: usize,
    pub replications: usize,
    pub coverage: f64,
    pub ci_half_width: f64,
    pub mean_radius: f64,
}

/// Columns: `n, x, truth, posterior_mean, mw_lower, mw_upper, linf_lower,
/// linf_upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub n: f64,
    pub x: f64,
    pub truth: f64,
    pub posterior_mean: f64,
    pub mw_lower: f64,
    pub mw_upper: f64,
    pub linf_lower: f64,
    pub linf_upper: f64,
}

pub type CoverageReport = Report<CoverageRow>;
pub type IndependenceReport = Report<IndependenceRow>;
pub type ScalingReport = Report<ScalingRow>;
pub type NegBvmReport = Report<NegBvmRow>;
pub type DirichletReport = Report<DirichletRow>;
pub type EnvelopeReport = Report<EnvelopeRow>;

impl ScalingReport {
    /// Least-squares slope of `log mean_l2_radius` on `log n`.
    pub fn radius_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.n, r.mean_l2_radius)).collect();
        loglog_slope(&pts)
    }

    pub fn diameter_slope(&self) -> Option<f64> {
        let pts: Option<Vec<(f64, f64)>> = self
            .rows
            .iter()
            .map(|r| r.mean_diameter.map(|d| (r.n, d)))
            .collect();
        pts.map(|p| loglog_slope(&p))
    }
}

pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

// ------------------------------------------------------------ experiments

struct CoverageRep {
    member: Vec<bool>,
    radius: Vec<f64>,
    diameter: Vec<Option<f64>>,
    alpha: Option<f64>,
}

/// Fresh data, fit, calibrate one set per `γ`, test membership of `f₀`.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (ni, &n) in cfg.n.iter().enumerate() {
        let basis = basis_for(&cfg.signal, n)?;
        let f0 = synthesize_signal(&cfg.signal, basis)?;
        let (variant, center) = match (&cfg.set, cfg.center) {
            (Some(v), Some(c)) => (v.clone(), c),
            (v, c) => {
                let (dv, dc) = default_set(&cfg.prior, &basis)?;
                (v.clone().unwrap_or(dv), c.unwrap_or(dc))
            }
        };
        let outcomes: Vec<Result<CoverageRep>> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(cfg.seed, ni, rep);
                let with_diameter = cfg.diameter && rep < cfg.diameter_reps;
                coverage_rep(cfg, &f0, n, seed, &variant, center, with_diameter)
            })
            .collect();
        let ok: Vec<&CoverageRep> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
        let failures = outcomes.len() - ok.len();
        for (gi, &gamma) in cfg.gamma.iter().enumerate() {
            let hits = ok.iter().filter(|o| o.member[gi]).count();
            let coverage = hits as f64 / ok.len().max(1) as f64;
            rows.push(CoverageRow {
                n,
                gamma,
                replications: ok.len(),
                failures,
                coverage,
                ci_half_width: ci_half_width(coverage, ok.len()),
                mean_radius: mean(&ok.iter().map(|o| o.radius[gi]).collect::<Vec<_>>()),
                mean_diameter: mean_opt(&ok.iter().map(|o| o.diameter[gi]).collect::<Vec<_>>()),
                mean_alpha: mean_opt(&ok.iter().map(|o| o.alpha).collect::<Vec<_>>()),
            });
        }
    }
    Ok(Report::new(cfg.experiment.name(), cfg.seed, rows))
}

fn coverage_rep(
    cfg: &ExperimentConfig,
    f0: &SignalCoefficients,
    n: f64,
    seed: u64,
    variant: &SetVariant,
    center: CenterRule,
    with_diameter: bool,
) -> Result<CoverageRep> {
    let obs = observe(f0, n, derive_seed(seed, PURPOSE_DATA))?;
    let fit = fit_prior(
        &cfg.prior,
        &obs,
        cfg.draws,
        derive_seed(seed, PURPOSE_CALIBRATION),
    )?;
    let mut out = CoverageRep {
        member: Vec::new(),
        radius: Vec::new(),
        diameter: Vec::new(),
        alpha: fit.alpha,
    };
    for &gamma in &cfg.gamma {
        let spec = CredibleSetSpec::new(variant.clone(), gamma, center)?;
        let set = build_set(&spec, &fit.draws, &fit.by)?;
        out.member.push(contains(&set, &f0.coeffs).member);
        out.radius.push(set.radius);
        out.diameter.push(if with_diameter {
            diameter_estimate(&set, &fit.draws, &diameter_norm(&f0.basis)).ok()
        } else {
            None
        });
    }
    Ok(out)
}

/// Coverage of the ℓ₂ ball around the posterior mean under a fixed,
/// oversmoothing `α`.
pub fn oversmoothing_demo(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    let mut c = cfg.clone();
    if !matches!(c.prior, PriorKind::FixedAlpha { .. }) {
        c.prior = PriorKind::FixedAlpha { alpha: 3.0 };
    }
    c.set = Some(c.set.unwrap_or(SetVariant::L2Ball));
    c.center = Some(c.center.unwrap_or(CenterRule::PosteriorMean));
    run_coverage(&c)
}

struct IndepRep {
    a: Vec<f64>,
    b: Vec<f64>,
    joint: Vec<f64>,
    tv: Vec<f64>,
}

/// Two sets calibrated on one draw set, memberships evaluated on fresh
/// draws; TV between the conditioned posteriors from the set-mass ratios
/// `½[Π(A∩Bᶜ)/Π(A) + Π(Aᶜ∩B)/Π(B)]`.
fn run_independence(
    cfg: &ExperimentConfig,
    sets: impl Fn(&BasisSpec) -> Result<[(SetVariant, CenterRule); 2]> + Sync,
) -> Result<IndependenceReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (ni, &n) in cfg.n.iter().enumerate() {
        let basis = basis_for(&cfg.signal, n)?;
        let f0 = synthesize_signal(&cfg.signal, basis)?;
        let [(va, ca), (vb, cb)] = sets(&basis)?;
        let outcomes: Vec<Result<IndepRep>> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(cfg.seed, ni, rep);
                let obs = observe(&f0, n, derive_seed(seed, PURPOSE_DATA))?;
                let fit = fit_prior(
                    &cfg.prior,
                    &obs,
                    cfg.draws,
                    derive_seed(seed, PURPOSE_CALIBRATION),
                )?;
                let fresh = fit
                    .draws
                    .resampled(cfg.fresh_draws, derive_seed(seed, PURPOSE_FRESH));
                let mut out = IndepRep {
                    a: vec![],
                    b: vec![],
                    joint: vec![],
                    tv: vec![],
                };
                for &gamma in &cfg.gamma {
                    let sa = build_set(
                        &CredibleSetSpec::new(va.clone(), gamma, ca)?,
                        &fit.draws,
                        &fit.by,
                    )?;
                    let sb = build_set(
                        &CredibleSetSpec::new(vb.clone(), gamma, cb)?,
                        &fit.draws,
                        &fit.by,
                    )?;
                    let (ma, mb) = (memberships(&sa, &fresh), memberships(&sb, &fresh));
                    let stats = mass_stats(&ma, &mb);
                    out.a.push(stats.0);
                    out.b.push(stats.1);
                    out.joint.push(stats.2);
                    out.tv.push(stats.3);
                }
                Ok(out)
            })
            .collect();
        let ok: Vec<&IndepRep> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
        if ok.is_empty() {
            return Err(outcomes
                .into_iter()
                .find_map(|o| o.err())
                .unwrap_or(Error::NoMembers));
        }
        for (gi, &gamma) in cfg.gamma.iter().enumerate() {
            let col =
                |f: &dyn Fn(&IndepRep) -> f64| mean(&ok.iter().map(|o| f(o)).collect::<Vec<_>>());
            let joint = col(&|o| o.joint[gi]);
            rows.push(IndependenceRow {
                n,
                gamma,
                replications: ok.len(),
                cred_a: col(&|o| o.a[gi]),
                cred_b: col(&|o| o.b[gi]),
                joint,
                product: col(&|o| o.a[gi] * o.b[gi]),
                expected: (1.0 - gamma) * (1.0 - gamma),
                tv: col(&|o| o.tv[gi]),
                joint_ci_half_width: ci_half_width(joint, ok.len() * cfg.fresh_draws),
            });
        }
    }
    Ok(Report::new(cfg.experiment.name(), cfg.seed, rows))
}

/// `(Π(A), Π(B), Π(A∩B), TV)` from membership flags.
pub fn mass_stats(a: &[bool], b: &[bool]) -> (f64, f64, f64, f64) {
    let m = a.len().max(1) as f64;
    let pa = a.iter().filter(|&&x| x).count() as f64 / m;
    let pb = b.iter().filter(|&&x| x).count() as f64 / m;
    let joint = a.iter().zip(b).filter(|(x, y)| **x && **y).count() as f64 / m;
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let tv = 0.5 * (ratio(pa - joint, pa) + ratio(pb - joint, pb));
    (pa, pb, joint, tv)
}

/// `C̃ₙ` and the ℓ₂ ball, both centred at the posterior mean.
pub fn run_independence_l2(cfg: &ExperimentConfig) -> Result<IndependenceReport> {
    run_independence(cfg, |_| {
        Ok([
            (
                cfg.set.clone().unwrap_or_else(SetVariant::eb_default),
                cfg.center.unwrap_or(CenterRule::PosteriorMean),
            ),
            (SetVariant::L2Ball, CenterRule::PosteriorMean),
        ])
    })
}

/// The four-significance credibility table; rows carry the same columns as
/// the ℓ₂ independence report.
pub fn run_credibility_table(cfg: &ExperimentConfig) -> Result<IndependenceReport> {
    run_independence_l2(cfg)
}

/// `D̄ₙ` (around `Y`) and the sup-norm ball around `T⁽¹⁾`.
pub fn run_independence_multiscale(cfg: &ExperimentConfig) -> Result<IndependenceReport> {
    if !cfg.prior.is_wavelet() {
        return invalid("multiscale independence needs the slab-and-spike prior");
    }
    run_independence(cfg, |basis| {
        let (band, center) = default_set(&cfg.prior, basis)?;
        Ok([
            (band, center),
            (
                SetVariant::SupBall,
                CenterRule::EfficientEstimator { variant: 1 },
            ),
        ])
    })
}

/// Mean ℓ₂ radius under the configured fixed `α` (ball around the
/// posterior mean) and, if requested, the mean ℓ₂ diameter of `C̃ₙ`.
pub fn radius_scaling(cfg: &ExperimentConfig) -> Result<ScalingReport> {
    cfg.validate()?;
    let gamma = cfg.gamma[0];
    let mut rows = Vec::new();
    for (ni, &n) in cfg.n.iter().enumerate() {
        let basis = basis_for(&cfg.signal, n)?;
        let f0 = synthesize_signal(&cfg.signal, basis)?;
        let reps: Vec<Result<(f64, Option<f64>, Option<f64>)>> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(cfg.seed, ni, rep);
                let obs = observe(&f0, n, derive_seed(seed, PURPOSE_DATA))?;
                let fit = fit_prior(
                    &cfg.prior,
                    &obs,
                    cfg.draws,
                    derive_seed(seed, PURPOSE_CALIBRATION),
                )?;
                let spec =
                    CredibleSetSpec::new(SetVariant::L2Ball, gamma, CenterRule::PosteriorMean)?;
                let radius = build_set(&spec, &fit.draws, &fit.by)?.radius;
                let (diam, alpha) = if cfg.diameter {
                    let eb = fit_prior(
                        &PriorKind::EmpiricalBayes,
                        &obs,
                        cfg.draws,
                        derive_seed(seed, PURPOSE_FRESH),
                    )?;
                    let spec = CredibleSetSpec::new(
                        SetVariant::eb_default(),
                        gamma,
                        CenterRule::ShiftEstimatorY,
                    )?;
                    let set = build_set(&spec, &eb.draws, &eb.by)?;
                    (
                        Some(diameter_estimate(&set, &eb.draws, &NormSpec::L2)?),
                        eb.alpha,
                    )
                } else {
                    (None, None)
                };
                Ok((radius, diam, alpha))
            })
            .collect();
        let ok: Vec<_> = reps.into_iter().collect::<Result<Vec<_>>>()?;
        rows.push(ScalingRow {
            n,
            replications: ok.len(),
            mean_l2_radius: mean(&ok.iter().map(|r| r.0).collect::<Vec<_>>()),
            mean_diameter: mean_opt(&ok.iter().map(|r| r.1).collect::<Vec<_>>()),
            mean_alpha: mean_opt(&ok.iter().map(|r| r.2).collect::<Vec<_>>()),
        });
    }
    Ok(Report::new(cfg.experiment.name(), cfg.seed, rows))
}

/// Posterior mass outside `{‖f - Y‖_{M(w)} < Mₙ/√n}`, `Mₙ = √log n/(2w_{l_m})`,
/// under `Π'` (`j₀ ≡ 0`) and the `⌈√log n⌉`-thresholded prior, averaged over
/// replications. Masses are exact products over coordinates.
pub fn run_negative_bvm(cfg: &ExperimentConfig) -> Result<NegBvmReport> {
    let nb = &cfg.negative_bvm;
    nb.validate()?;
    if cfg.replications == 0 {
        return invalid("replications must be positive");
    }
    let w = WeightSequence::power_law(nb.weight_eps, 1.0, nb.resolution())?;
    let pi_prime = SlabSpikeConfig::full_thresholding(nb.tau, nb.k_floor);
    let thresholded = SlabSpikeConfig {
        j0_rule: J0Rule::SqrtLogN,
        tau: nb.tau,
        k_floor: nb.k_floor,
    };
    let mut rows = Vec::new();
    for (si, stage) in nb.stages.iter().enumerate() {
        let f0 = nb.signal(si)?;
        let j0 = thresholded.j0(stage.n);
        let self_similar =
            crate::seqmodel::check_self_similar_sup(&f0, nb.beta, 0.5 * nb.radius, j0)?.holds;
        let m_n = stage.n.ln().sqrt() / (2.0 * w.get(stage.level));
        let radius = m_n / stage.n.sqrt();
        let masses: Vec<(f64, f64)> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(cfg.seed, si, rep);
                let obs = observe(&f0, stage.n, derive_seed(seed, PURPOSE_DATA))?;
                let escape = |c: &SlabSpikeConfig| -> Result<f64> {
                    let post = slabspike::posterior(&obs, c)?;
                    Ok(1.0 - post.multiscale_ball_mass(&obs.y, &w, radius))
                };
                Ok((escape(&pi_prime)?, escape(&thresholded)?))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(NegBvmRow {
            stage: si + 1,
            n: stage.n,
            level: stage.level,
            position: haar_position(stage.level, stage.shift),
            m_n,
            replications: masses.len(),
            escaping_pi_prime: mean(&masses.iter().map(|m| m.0).collect::<Vec<_>>()),
            escaping_thresholded: mean(&masses.iter().map(|m| m.1).collect::<Vec<_>>()),
            self_similar,
        });
    }
    Ok(Report::new(cfg.experiment.name(), cfg.seed, rows))
}

/// Output of the histogram demo: coverage of the `M(w)` set per `n` and the
/// band envelopes at every `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletDemo {
    pub coverage: DirichletReport,
    pub envelope: EnvelopeReport,
}

/// Histogram prior with Dirichlet weights on Laplace data: the `M(w)` ball
/// (`w_l = l^{1/2+ε}`) around the posterior mean retains the closest
/// `⌈(1-γ)M⌉` draws; envelopes are pointwise min/max over retained draws,
/// for that set and for the sup-norm ball around the posterior mean.
pub fn run_dirichlet_demo(cfg: &ExperimentConfig) -> Result<DirichletDemo> {
    cfg.validate()?;
    let gamma = cfg.gamma[0];
    let mut cov_rows = Vec::new();
    let mut env_rows = Vec::new();
    for (ni, &n) in cfg.n.iter().enumerate() {
        if n.fract() != 0.0 {
            return invalid("the histogram demo needs integer sample sizes");
        }
        let size = n as usize;
        let model = HistogramModel::default_for(size);
        let basis = model.basis();
        let truth = dirichlethist::truth_coefficients(model.level)?;
        let w = WeightSequence::power_law(DEFAULT_WEIGHT_EPS, 1.0, basis.max_index)?;
        let mw = NormKernel::new(&basis, &NormSpec::Multiscale(w))?;
        let reps: Vec<(bool, f64)> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(cfg.seed, ni, rep);
                let (post, draws) = dirichlet_fit(size, model, seed, cfg.draws)?;
                let center =
                    dirichlethist::haar_coefficients(&post.mean_probabilities(), model.level)?;
                let d = draws.map_rows(|r| mw.dist(r, &center));
                let radius = crate::credsets::quantile_radius(&d, gamma)?;
                Ok((mw.dist(&truth, &center) <= radius, radius))
            })
            .collect::<Result<Vec<_>>>()?;
        let coverage = reps.iter().filter(|r| r.0).count() as f64 / reps.len() as f64;
        cov_rows.push(DirichletRow {
            n,
            level: model.level,
            replications: reps.len(),
            coverage,
            ci_half_width: ci_half_width(coverage, reps.len()),
            mean_radius: mean(&reps.iter().map(|r| r.1).collect::<Vec<_>>()),
        });
        env_rows.extend(dirichlet_envelope(cfg, ni, n, model, &mw, gamma)?);
    }
    Ok(DirichletDemo {
        coverage: Report::new(cfg.experiment.name(), cfg.seed, cov_rows),
        envelope: Report::new("dirichlet_envelope", cfg.seed, env_rows),
    })
}

fn dirichlet_fit(
    size: usize,
    model: HistogramModel,
    seed: u64,
    m: usize,
) -> Result<(dirichlethist::DirichletPosterior, PosteriorDrawSet)> {
    let x = dirichlethist::sample_iid_laplace(size, derive_seed(seed, PURPOSE_DATA))?;
    let post = dirichlethist::posterior(&dirichlethist::bin_counts(&x, model.level)?)?;
    let draws = post.sample(m, derive_seed(seed, PURPOSE_CALIBRATION))?;
    Ok((post, draws))
}

/// Envelopes of the first replication's retained draws on the bin grid.
fn dirichlet_envelope(
    cfg: &ExperimentConfig,
    ni: usize,
    n: f64,
    model: HistogramModel,
    mw: &NormKernel,
    gamma: f64,
) -> Result<Vec<EnvelopeRow>> {
    let seed = replication_seed(cfg.seed, ni, 0);
    let (post, draws) = dirichlet_fit(n as usize, model, seed, cfg.draws)?;
    let center = dirichlethist::haar_coefficients(&post.mean_probabilities(), model.level)?;
    let rows = draws.materialize();
    let cells: Vec<Vec<f64>> = rows.iter().map(|r| haar_cell_values(r)).collect();
    let center_cells = haar_cell_values(&center);
    let sup = NormKernel::Sup;
    let keep = |d: Vec<f64>| -> Result<Vec<bool>> {
        let r = crate::credsets::quantile_radius(&d, gamma)?;
        Ok(d.iter().map(|&v| v <= r).collect())
    };
    let keep_mw = keep(rows.iter().map(|r| mw.dist(r, &center)).collect())?;
    let keep_sup = keep(rows.iter().map(|r| sup.dist(r, &center)).collect())?;
    let law = crate::seqmodel::TruncatedLaplace::new(
        dirichlethist::LAPLACE_LOC,
        dirichlethist::LAPLACE_RATE,
    )?;
    let bins = model.bins();
    let grid = midpoint_grid(bins);
    let envelope = |keep: &[bool], j: usize| {
        let vals = cells
            .iter()
            .zip(keep)
            .filter(|(_, k)| **k)
            .map(|(c, _)| c[j]);
        vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    };
    Ok(grid
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let (mw_lower, mw_upper) = envelope(&keep_mw, j);
            let (linf_lower, linf_upper) = envelope(&keep_sup, j);
            EnvelopeRow {
                n,
                x,
                truth: law.density(x),
                posterior_mean: center_cells[j],
                mw_lower,
                mw_upper,
                linf_lower,
                linf_upper,
            }
        })
        .collect())
}

// ---------------------------------------------------------- dispatching

/// Result of any experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Coverage(CoverageReport),
    Independence(IndependenceReport),
    Scaling(ScalingReport),
    NegativeBvm(NegBvmReport),
    Dirichlet(DirichletDemo),
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    Ok(match cfg.experiment {
        Experiment::Coverage => Outcome::Coverage(run_coverage(cfg)?),
        Experiment::OversmoothingDemo => Outcome::Coverage(oversmoothing_demo(cfg)?),
        Experiment::CredibilityTable => Outcome::Independence(run_credibility_table(cfg)?),
        Experiment::IndependenceL2 => Outcome::Independence(run_independence_l2(cfg)?),
        Experiment::IndependenceMultiscale => {
            Outcome::Independence(run_independence_multiscale(cfg)?)
        }
        Experiment::RadiusScaling => Outcome::Scaling(radius_scaling(cfg)?),
        Experiment::NegativeBvm => Outcome::NegativeBvm(run_negative_bvm(cfg)?),
        Experiment::DirichletDemo => Outcome::Dirichlet(run_dirichlet_demo(cfg)?),
    })
}

/// One acceptance threshold applied to a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub pass: bool,
}

impl Check {
    fn new(name: String, value: f64, target: String, pass: bool) -> Self {
        Self {
            name,
            value,
            target,
            pass,
        }
    }
}

impl Outcome {
    /// Threshold checks used by `--check`.
    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        match self {
            Outcome::Coverage(r) if r.experiment == Experiment::OversmoothingDemo.name() => {
                for row in &r.rows {
                    out.push(Check::new(
                        format!("oversmoothing coverage n={} γ={}", row.n, row.gamma),
                        row.coverage,
                        "< 0.2".into(),
                        row.coverage < 0.2,
                    ));
                }
            }
            Outcome::Coverage(r) => {
                for row in &r.rows {
                    let t = 1.0 - row.gamma;
                    out.push(Check::new(
                        format!("coverage n={} γ={}", row.n, row.gamma),
                        row.coverage,
                        format!("{t} ± 0.04"),
                        (row.coverage - t).abs() <= 0.04,
                    ));
                }
            }
            Outcome::Independence(r) => {
                let (cred_tol, joint_tol, tv_tol) =
                    if r.experiment == Experiment::IndependenceMultiscale.name() {
                        (None, 0.03, 0.03)
                    } else {
                        (Some(0.005), 0.015, 0.02)
                    };
                for row in &r.rows {
                    if let Some(tol) = cred_tol {
                        out.push(Check::new(
                            format!("credibility A n={} γ={}", row.n, row.gamma),
                            row.cred_a,
                            format!("{} ± {tol}", 1.0 - row.gamma),
                            (row.cred_a - (1.0 - row.gamma)).abs() <= tol,
                        ));
                    }
                    out.push(Check::new(
                        format!("joint credibility n={} γ={}", row.n, row.gamma),
                        row.joint,
                        format!("{} ± {joint_tol}", row.expected),
                        (row.joint - row.expected).abs() <= joint_tol,
                    ));
                    out.push(Check::new(
                        format!("TV n={} γ={}", row.n, row.gamma),
                        row.tv,
                        format!("{} ± {tv_tol}", row.gamma),
                        (row.tv - row.gamma).abs() <= tv_tol,
                    ));
                }
            }
            Outcome::Scaling(r) => {
                let s = r.radius_slope();
                out.push(Check::new(
                    "ℓ₂ radius slope".into(),
                    s,
                    "-1/3 ± 0.05".into(),
                    (s + 1.0 / 3.0).abs() <= 0.05,
                ));
                if let Some(d) = r.diameter_slope() {
                    out.push(Check::new(
                        "C̃ₙ diameter slope".into(),
                        d,
                        "-1/3 ± 0.08".into(),
                        (d + 1.0 / 3.0).abs() <= 0.08,
                    ));
                }
            }
            Outcome::NegativeBvm(r) => {
                for row in &r.rows {
                    out.push(Check::new(
                        format!("Π' escaping mass stage {}", row.stage),
                        row.escaping_pi_prime,
                        "> 0.9".into(),
                        row.escaping_pi_prime > 0.9,
                    ));
                    out.push(Check::new(
                        format!("thresholded escaping mass stage {}", row.stage),
                        row.escaping_thresholded,
                        "< 0.5".into(),
                        row.escaping_thresholded < 0.5,
                    ));
                }
            }
            Outcome::Dirichlet(d) => {
                for row in &d.coverage.rows {
                    out.push(Check::new(
                        format!("histogram coverage n={}", row.n),
                        row.coverage,
                        ">= 0.9".into(),
                        row.coverage >= 0.9,
                    ));
                }
            }
        }
        out
    }

    /// Writes every report of the outcome into `dir`; returns
    /// `(path, sha256)` pairs.
    pub fn emit(&self, dir: &Path, format: Format) -> Result<Vec<(PathBuf, String)>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let mut put = |name: &str, f: &dyn Fn(&Path) -> Result<String>| -> Result<()> {
            let path = dir.join(format!("{name}.{}", format.extension()));
            let sum = f(&path)?;
            out.push((path, sum));
            Ok(())
        };
        match self {
            Outcome::Coverage(r) => put(&r.experiment, &|p| emit(r, format, p))?,
            Outcome::Independence(r) => put(&r.experiment, &|p| emit(r, format, p))?,
            Outcome::Scaling(r) => put(&r.experiment, &|p| emit(r, format, p))?,
            Outcome::NegativeBvm(r) => put(&r.experiment, &|p| emit(r, format, p))?,
            Outcome::Dirichlet(d) => {
                put(&d.coverage.experiment, &|p| emit(&d.coverage, format, p))?;
                put(&d.envelope.experiment, &|p| emit(&d.envelope, format, p))?;
            }
        }
        Ok(out)
    }
}

// ----------------------------------------------------------------- output

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format '{other}'"))),
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Serializes a report to bytes. CSV files start with a
/// `# schema_version=…,experiment=…,seed=…` line.
pub fn render<R: Serialize>(report: &Report<R>, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(report)?;
            v.push(b'\n');
            Ok(v)
        }
        Format::Csv => {
            let mut buf = Vec::new();
            writeln!(
                buf,
                "# schema_version={},experiment={},seed={}",
                report.schema_version, report.experiment, report.seed
            )?;
            let mut w = csv::Writer::from_writer(buf);
            for row in &report.rows {
                w.serialize(row)?;
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
    }
}

/// Writes the report and returns the SHA-256 of the bytes written.
pub fn emit<R: Serialize>(report: &Report<R>, format: Format, path: &Path) -> Result<String> {
    let bytes = render(report, format)?;
    std::fs::write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn checksum_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

pub fn parse_report<R: DeserializeOwned>(text: &str, format: Format) -> Result<Report<R>> {
    match format {
        Format::Json => Ok(serde_json::from_str(text)?),
        Format::Csv => {
            let (header, body) = text
                .split_once('\n')
                .ok_or_else(|| Error::Parse("empty report".into()))?;
            let fields: BTreeMap<&str, &str> = header
                .trim_start_matches('#')
                .trim()
                .split(',')
                .filter_map(|kv| kv.split_once('='))
                .collect();
            let get = |k: &str| {
                fields
                    .get(k)
                    .copied()
                    .ok_or_else(|| Error::Parse(format!("report header lacks '{k}'")))
            };
            let schema_version = get("schema_version")?
                .parse()
                .map_err(|_| Error::Parse("bad schema_version".into()))?;
            let seed = get("seed")?
                .parse()
                .map_err(|_| Error::Parse("bad seed".into()))?;
            let experiment = get("experiment")?.to_string();
            let mut rdr = csv::Reader::from_reader(body.as_bytes());
            let rows = rdr
                .deserialize()
                .collect::<std::result::Result<Vec<R>, _>>()?;
            Ok(Report {
                schema_version,
                experiment,
                seed,
                rows,
            })
        }
    }
}

/// Values of a Haar or Fourier coefficient array on `grid` (re-exported for
/// envelope consumers).
pub fn function_values(basis: &BasisSpec, coeffs: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    evaluate_coeffs(basis, coeffs, grid)
}
