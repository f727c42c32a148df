//! Credible sets: radius calibration by posterior quantiles, construction of
//! every set geometry, membership, credibility, diameter and pointwise bands.
//!
//! Radii are stored on the coefficient scale (`Rₙ/√n`), so membership is a
//! plain norm comparison.

use serde::{Deserialize, Serialize};

use crate::draws::PosteriorDrawSet;
use crate::error::{invalid, Error, Result};
use crate::seqmodel::{
    evaluate_coeffs, haar_cell_values, haar_index, BasisSpec, NormKernel, NormSpec, WeightSequence,
};
use crate::slabspike::{project_on_support, ThresholdEstimate};

/// Default `δ` of the H(δ) balls.
pub const DEFAULT_DELTA: f64 = 2.1;
/// Minimum number of draws for a quantile calibration.
pub const MIN_DRAWS: usize = 20;
/// Cap on member draws in the pairwise diameter scan.
pub const DIAMETER_MEMBERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterRule {
    ShiftEstimatorY,
    PosteriorMean,
    EfficientEstimator { variant: u8 },
}

/// Undersmoothing `εₙ = c / log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsRule {
    pub c: f64,
}

impl Default for EpsRule {
    fn default() -> Self {
        Self { c: 1.0 }
    }
}

impl EpsRule {
    pub fn eval(&self, n: f64) -> f64 {
        self.c / n.ln()
    }
}

/// Radius factor `Mₙ` of the hierarchical smoothness ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MnRule {
    /// `log log n`.
    LogLog,
    Constant(f64),
}

impl MnRule {
    pub fn eval(&self, n: f64) -> f64 {
        match *self {
            MnRule::LogLog => n.ln().ln(),
            MnRule::Constant(c) => c,
        }
    }
}

/// Band inflation `vₙ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VnRule {
    /// `(log n)^{1/4}`.
    QuarterLog,
    Constant(f64),
}

impl VnRule {
    pub fn eval(&self, n: f64) -> f64 {
        match *self {
            VnRule::QuarterLog => n.ln().powf(0.25),
            VnRule::Constant(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SetVariant {
    L2Ball,
    HDeltaBall {
        delta: f64,
    },
    /// H(δ) ball intersected with `‖f - f̂ₙ‖_{H^{α̂ₙ-εₙ}} ≤ C√log n`.
    HDeltaIntersectEB {
        delta: f64,
        c: f64,
        eps: EpsRule,
    },
    /// H(δ) ball intersected with `‖f - f̂ₙ‖_{H^{β̂ₙ}} ≤ Mₙ√log n`,
    /// `β̂ₙ = α_M - (C+1)/log n`.
    HDeltaIntersectHB {
        delta: f64,
        c: f64,
        mn: MnRule,
    },
    MultiscaleBall {
        w: WeightSequence,
    },
    /// Multiscale ball intersected with the sup-norm band of half-width
    /// `σ_{n,γ}` around `π_med(Y)`.
    MultiscaleBand {
        w: WeightSequence,
        vn: VnRule,
    },
    SupBall,
    PointwiseBand {
        grid: Vec<f64>,
    },
}

impl SetVariant {
    pub fn eb_default() -> Self {
        SetVariant::HDeltaIntersectEB {
            delta: DEFAULT_DELTA,
            c: 1.0,
            eps: EpsRule::default(),
        }
    }

    pub fn hb_default() -> Self {
        SetVariant::HDeltaIntersectHB {
            delta: DEFAULT_DELTA,
            c: 1.0,
            mn: MnRule::LogLog,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SetVariant::L2Ball => "l2_ball",
            SetVariant::HDeltaBall { .. } => "h_delta_ball",
            SetVariant::HDeltaIntersectEB { .. } => "h_delta_intersect_eb",
            SetVariant::HDeltaIntersectHB { .. } => "h_delta_intersect_hb",
            SetVariant::MultiscaleBall { .. } => "multiscale_ball",
            SetVariant::MultiscaleBand { .. } => "multiscale_band",
            SetVariant::SupBall => "sup_ball",
            SetVariant::PointwiseBand { .. } => "pointwise_band",
        }
    }

    fn needs_wavelets(&self) -> bool {
        matches!(
            self,
            SetVariant::MultiscaleBall { .. }
                | SetVariant::MultiscaleBand { .. }
                | SetVariant::SupBall
        )
    }

    /// Norm of the primary (calibrated) ball.
    pub fn primary_norm(&self, basis: &BasisSpec) -> Option<NormSpec> {
        match self {
            SetVariant::L2Ball => Some(NormSpec::L2),
            SetVariant::HDeltaBall { delta }
            | SetVariant::HDeltaIntersectEB { delta, .. }
            | SetVariant::HDeltaIntersectHB { delta, .. } => Some(NormSpec::h_delta(*delta)),
            SetVariant::MultiscaleBall { w } | SetVariant::MultiscaleBand { w, .. } => {
                Some(NormSpec::Multiscale(w.clone()))
            }
            SetVariant::SupBall => Some(NormSpec::SupNorm {
                grid_level: basis.max_index + 1,
            }),
            SetVariant::PointwiseBand { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleSetSpec {
    pub variant: SetVariant,
    pub gamma: f64,
    pub center_rule: CenterRule,
}

impl CredibleSetSpec {
    pub fn new(variant: SetVariant, gamma: f64, center_rule: CenterRule) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return invalid("γ must lie in (0,1)");
        }
        Ok(Self {
            variant,
            gamma,
            center_rule,
        })
    }
}

/// Quantities a set may need besides the draws.
#[derive(Debug, Clone, Default)]
pub struct Byproducts {
    pub n: f64,
    pub y: Vec<f64>,
    pub posterior_mean: Option<Vec<f64>>,
    pub alpha_hat: Option<f64>,
    pub alpha_median: Option<f64>,
    pub threshold: Option<ThresholdEstimate>,
    /// Efficient estimator matching `CenterRule::EfficientEstimator`.
    pub efficient: Option<Vec<f64>>,
    /// `Jₙ` of the slab-and-spike prior (band levels).
    pub jn: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondConstraint {
    pub norm: NormSpec,
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandConstraint {
    pub support: Vec<usize>,
    pub sigma: f64,
    /// `π_med(Y)`.
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseIntervals {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PointwiseIntervals {
    pub fn widths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Primary,
    Smoothness,
    Band,
    Pointwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub member: bool,
    pub binding_constraint: Option<Constraint>,
    /// `(constraint, distance, limit)` for every checked constraint.
    pub distances: Vec<(Constraint, f64, f64)>,
}

/// A calibrated set. Norm kernels are compiled once at construction.
#[derive(Debug, Clone)]
pub struct CalibratedCredibleSet {
    pub spec: CredibleSetSpec,
    pub basis: BasisSpec,
    pub center: Vec<f64>,
    pub radius: f64,
    pub second_constraint: Option<SecondConstraint>,
    pub band: Option<BandConstraint>,
    pub pointwise: Option<PointwiseIntervals>,
    primary: Option<NormKernel>,
    second: Option<NormKernel>,
}

/// External summary `{variant, gamma, radius, second_constraint, support, sigma}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub schema_version: u32,
    pub variant: String,
    pub gamma: f64,
    pub radius: f64,
    pub second_constraint: Option<SecondConstraintSummary>,
    pub support: Option<Vec<(usize, usize)>>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondConstraintSummary {
    pub norm: NormSpec,
    pub radius: f64,
}

impl CalibratedCredibleSet {
    pub fn summary(&self) -> SetSummary {
        SetSummary {
            schema_version: crate::harness::SCHEMA_VERSION,
            variant: self.spec.variant.name().to_string(),
            gamma: self.spec.gamma,
            radius: self.radius,
            second_constraint: self
                .second_constraint
                .as_ref()
                .map(|s| SecondConstraintSummary {
                    norm: s.norm.clone(),
                    radius: s.radius,
                }),
            support: self.band.as_ref().map(|b| {
                b.support
                    .iter()
                    .map(|&m| haar_index(m).unwrap_or((0, 0)))
                    .collect()
            }),
            sigma: self.band.as_ref().map(|b| b.sigma),
        }
    }

    /// Distance of `f` to the center in the primary norm.
    pub fn primary_distance(&self, f: &[f64]) -> Option<f64> {
        self.primary.as_ref().map(|k| k.dist(f, &self.center))
    }
}

/// `⌈(1-γ)M⌉`-th smallest distance (lower empirical quantile).
pub fn quantile_radius(distances: &[f64], gamma: f64) -> Result<f64> {
    if distances.len() < MIN_DRAWS {
        return Err(Error::TooFewDraws {
            needed: MIN_DRAWS,
            got: distances.len(),
        });
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return invalid("γ must lie in (0,1)");
    }
    Ok(order_statistic(distances, 1.0 - gamma))
}

/// `⌈qM⌉`-th smallest value (1-based; `q ≤ 0` gives the minimum).
pub fn order_statistic(values: &[f64], q: f64) -> f64 {
    let m = values.len();
    let rank = ((q * m as f64) - 1e-9).ceil().clamp(1.0, m as f64) as usize;
    let mut v = values.to_vec();
    let (_, nth, _) = v.select_nth_unstable_by(rank - 1, |a, b| a.total_cmp(b));
    *nth
}

pub fn calibrate_radius(
    draws: &PosteriorDrawSet,
    center: &[f64],
    norm: &NormSpec,
    gamma: f64,
) -> Result<f64> {
    if draws.len() < MIN_DRAWS {
        return Err(Error::TooFewDraws {
            needed: MIN_DRAWS,
            got: draws.len(),
        });
    }
    let kernel = NormKernel::new(&draws.basis, norm)?;
    let d = draws.map_rows(|r| kernel.dist(r, center));
    quantile_radius(&d, gamma)
}

fn center_for(rule: CenterRule, by: &Byproducts) -> Result<Vec<f64>> {
    match rule {
        CenterRule::ShiftEstimatorY => Ok(by.y.clone()),
        CenterRule::PosteriorMean => by
            .posterior_mean
            .clone()
            .ok_or_else(|| Error::MissingByproduct("posterior mean".into())),
        CenterRule::EfficientEstimator { .. } => by
            .efficient
            .clone()
            .ok_or_else(|| Error::MissingByproduct("efficient estimator".into())),
    }
}

/// `σ_{n,γ} = vₙ √(log n/n) sup_x Σ_{selected, l ≤ Jₙ} |ψ_lk(x)|`. The
/// scaling coefficient counts as a level-0 term with `|φ| = 1`.
pub fn band_sigma(support: &[usize], basis: &BasisSpec, n: f64, vn: f64, jn: usize) -> f64 {
    let cells = basis.len();
    let mut diff = vec![0.0; cells + 1];
    let mut any = false;
    for &m in support {
        let (lo, hi, amp) = match haar_index(m) {
            None => (0, cells, 1.0),
            Some((l, k)) => {
                if l > jn {
                    continue;
                }
                let span = cells >> l;
                (k * span, (k + 1) * span, ((1u64 << l) as f64).sqrt())
            }
        };
        diff[lo] += amp;
        diff[hi] -= amp;
        any = true;
    }
    if !any {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut sup: f64 = 0.0;
    for d in &diff[..cells] {
        acc += d;
        sup = sup.max(acc);
    }
    vn * (n.ln() / n).sqrt() * sup
}

pub fn build_set(
    spec: &CredibleSetSpec,
    draws: &PosteriorDrawSet,
    by: &Byproducts,
) -> Result<CalibratedCredibleSet> {
    let basis = draws.basis;
    if spec.variant.needs_wavelets() && !basis.is_wavelet() {
        return Err(Error::BasisMismatch(format!(
            "{} requires the Haar basis",
            spec.variant.name()
        )));
    }
    if by.y.len() != basis.len() {
        return Err(Error::BasisMismatch(
            "observation length differs from draws".into(),
        ));
    }
    let center = center_for(spec.center_rule, by)?;
    let n = by.n;
    let mut second_constraint = None;
    let mut band = None;
    let mut pointwise = None;

    let (radius, primary) = match spec.variant.primary_norm(&basis) {
        Some(norm) => {
            let kernel = NormKernel::new(&basis, &norm)?;
            if draws.len() < MIN_DRAWS {
                return Err(Error::TooFewDraws {
                    needed: MIN_DRAWS,
                    got: draws.len(),
                });
            }
            let d = draws.map_rows(|r| kernel.dist(r, &center));
            (quantile_radius(&d, spec.gamma)?, Some(kernel))
        }
        None => (0.0, None),
    };

    match &spec.variant {
        SetVariant::HDeltaIntersectEB { c, eps, .. } => {
            let alpha = by
                .alpha_hat
                .ok_or_else(|| Error::MissingByproduct("α̂ₙ".into()))?;
            let mean = by
                .posterior_mean
                .clone()
                .ok_or_else(|| Error::MissingByproduct("posterior mean".into()))?;
            second_constraint = Some(SecondConstraint {
                norm: NormSpec::sobolev(alpha - eps.eval(n)),
                center: mean,
                radius: c * n.ln().sqrt(),
            });
        }
        SetVariant::HDeltaIntersectHB { c, mn, .. } => {
            let alpha_m = by
                .alpha_median
                .ok_or_else(|| Error::MissingByproduct("hierarchical median α_M".into()))?;
            let mean = by
                .posterior_mean
                .clone()
                .ok_or_else(|| Error::MissingByproduct("posterior mean".into()))?;
            second_constraint = Some(SecondConstraint {
                norm: NormSpec::sobolev(alpha_m - (c + 1.0) / n.ln()),
                center: mean,
                radius: mn.eval(n) * n.ln().sqrt(),
            });
        }
        SetVariant::MultiscaleBand { vn, .. } => {
            let est = by
                .threshold
                .as_ref()
                .ok_or_else(|| Error::MissingByproduct("threshold estimate".into()))?;
            let jn = by.jn.unwrap_or(basis.max_index);
            band = Some(BandConstraint {
                support: est.support.clone(),
                sigma: band_sigma(&est.support, &basis, n, vn.eval(n), jn),
                center: project_on_support(&by.y, est),
            });
        }
        SetVariant::PointwiseBand { grid } => {
            pointwise = Some(pointwise_band(draws, grid, spec.gamma)?);
        }
        _ => {}
    }

    let second = match &second_constraint {
        Some(s) => Some(NormKernel::new(&basis, &s.norm)?),
        None => None,
    };
    let radius = match &pointwise {
        Some(p) => p.widths().iter().fold(0.0, |m: f64, w| m.max(0.5 * w)),
        None => radius,
    };
    Ok(CalibratedCredibleSet {
        spec: spec.clone(),
        basis,
        center,
        radius,
        second_constraint,
        band,
        pointwise,
        primary,
        second,
    })
}

/// Checks every constraint in order; the first violated one binds.
pub fn contains(set: &CalibratedCredibleSet, f: &[f64]) -> MembershipReport {
    let mut distances = Vec::new();
    let mut binding = None;
    if let Some(k) = &set.primary {
        let d = k.dist(f, &set.center);
        distances.push((Constraint::Primary, d, set.radius));
        if d > set.radius {
            binding.get_or_insert(Constraint::Primary);
        }
    }
    if let (Some(s), Some(k)) = (&set.second_constraint, &set.second) {
        let d = k.dist(f, &s.center);
        distances.push((Constraint::Smoothness, d, s.radius));
        if d > s.radius {
            binding.get_or_insert(Constraint::Smoothness);
        }
    }
    if let Some(b) = &set.band {
        let d = NormKernel::Sup.dist(f, &b.center);
        distances.push((Constraint::Band, d, b.sigma));
        if d > b.sigma {
            binding.get_or_insert(Constraint::Band);
        }
    }
    if let Some(p) = &set.pointwise {
        let vals = evaluate_coeffs(&set.basis, f, &p.grid).unwrap_or_default();
        let worst = vals
            .iter()
            .zip(p.lower.iter().zip(&p.upper))
            .map(|(v, (l, u))| (l - v).max(v - u))
            .fold(f64::NEG_INFINITY, f64::max);
        distances.push((Constraint::Pointwise, worst, 0.0));
        if worst > 0.0 {
            binding.get_or_insert(Constraint::Pointwise);
        }
    }
    MembershipReport {
        member: binding.is_none(),
        binding_constraint: binding,
        distances,
    }
}

/// Membership flags of every draw.
pub fn memberships(set: &CalibratedCredibleSet, draws: &PosteriorDrawSet) -> Vec<bool> {
    draws.map_rows(|r| contains(set, r).member)
}

/// Fraction of (fresh) draws inside the set.
pub fn credibility(set: &CalibratedCredibleSet, fresh: &PosteriorDrawSet) -> f64 {
    let m = memberships(set, fresh);
    m.iter().filter(|&&b| b).count() as f64 / m.len().max(1) as f64
}

/// Largest pairwise distance among member draws (at most 500 members,
/// evenly spaced through the member list). A lower bound on the diameter.
pub fn diameter_estimate(
    set: &CalibratedCredibleSet,
    draws: &PosteriorDrawSet,
    norm: &NormSpec,
) -> Result<f64> {
    let kernel = NormKernel::new(&draws.basis, norm)?;
    let flags = memberships(set, draws);
    let members: Vec<usize> = flags
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i)
        .collect();
    if members.len() < 2 {
        return Err(Error::NoMembers);
    }
    let picked: Vec<usize> = if members.len() > DIAMETER_MEMBERS {
        (0..DIAMETER_MEMBERS)
            .map(|i| members[i * members.len() / DIAMETER_MEMBERS])
            .collect()
    } else {
        members
    };
    let rows: Vec<Vec<f64>> = picked.iter().map(|&i| draws.row(i)).collect();
    Ok(match kernel {
        // Haar synthesis is linear: compare cell values directly.
        NormKernel::Sup => {
            let cells: Vec<Vec<f64>> = rows.iter().map(|r| haar_cell_values(r)).collect();
            let len = cells[0].len();
            max_pairwise(&cells, &NormKernel::WeightedMax(vec![1.0; len]))
        }
        _ => max_pairwise(&rows, &kernel),
    })
}

pub fn max_pairwise(rows: &[Vec<f64>], kernel: &NormKernel) -> f64 {
    use rayon::prelude::*;
    (0..rows.len())
        .into_par_iter()
        .map(|i| {
            rows[i + 1..]
                .iter()
                .map(|r| kernel.dist(&rows[i], r))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Per-point `(γ/2, 1-γ/2)` empirical quantiles of the draw values.
pub fn pointwise_band(
    draws: &PosteriorDrawSet,
    grid: &[f64],
    gamma: f64,
) -> Result<PointwiseIntervals> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return invalid("γ must lie in (0,1)");
    }
    if draws.is_empty() {
        return Err(Error::TooFewDraws { needed: 1, got: 0 });
    }
    let basis = draws.basis;
    let values = draws.map_rows(|r| evaluate_coeffs(&basis, r, grid));
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    let mut col = vec![0.0; values.len()];
    for j in 0..grid.len() {
        for (c, row) in col.iter_mut().zip(&values) {
            *c = row[j];
        }
        lower.push(order_statistic(&col, gamma / 2.0));
        upper.push(order_statistic(&col, 1.0 - gamma / 2.0));
    }
    Ok(PointwiseIntervals {
        grid: grid.to_vec(),
        lower,
        upper,
    })
}
