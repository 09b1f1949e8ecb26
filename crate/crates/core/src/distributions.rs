//! Finite-support loss distributions and action-parameterized loss families.
//!
//! A [`DiscreteDistribution`] is the law of the random cyber loss at a fixed
//! protection investment. A [`ParameterizedLossModel`] maps an investment `x`
//! in the compact action set `[action_low, action_high]` to such a law, and
//! carries the diagnostics for the two structural assumptions the contract
//! analysis leans on: a first-order stochastic dominance shift in `x`, and a
//! pmf that is convex in `x` atom by atom.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on the total probability mass.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Tolerance used by the dominance and convexity diagnostics.
pub const DIAGNOSTIC_TOLERANCE: f64 = 1e-9;

/// Default damping of the ransomware lock probability.
pub const DEFAULT_DAMPING: f64 = 0.8;

/// Slack allowed when an action lands a few ulps outside the action set.
const ACTION_SLACK: f64 = 1e-12;

/// Mass sums of tabulated rows within this distance of 1 are renormalized.
const ROW_MASS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("distribution has no atoms")]
    Empty,
    #[error("support and probability lengths differ ({support} vs {probs})")]
    LengthMismatch { support: usize, probs: usize },
    #[error("non-finite value in distribution at index {index}")]
    NonFinite { index: usize },
    #[error("support must be strictly increasing (index {index})")]
    Unsorted { index: usize },
    #[error("negative probability {prob} at index {index}")]
    NegativeProbability { index: usize, prob: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    MassNotOne { sum: f64 },
    #[error("loss support must be nonnegative, found {value}")]
    NegativeLoss { value: f64 },
    #[error("action {x} outside action set [{low}, {high}]")]
    ActionOutOfRange { x: f64, low: f64, high: f64 },
    #[error("invalid action set [{low}, {high}]")]
    InvalidActionSet { low: f64, high: f64 },
    #[error("lock probability {prob} outside [0, 1] at action {x}")]
    LockProbability { x: f64, prob: f64 },
    #[error("invalid model parameter: {0}")]
    Parameter(String),
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),
    #[error("tabulated family: {0}")]
    Table(String),
}

/// Law of a random loss with finitely many atoms.
///
/// Support values are strictly increasing and every probability is
/// nonnegative with total mass 1. Support values may be signed: transformed
/// losses such as `c*xi - q` are evaluated with the same machinery. Loss
/// models themselves only ever produce nonnegative supports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self, DistributionError> {
        if support.is_empty() {
            return Err(DistributionError::Empty);
        }
        if support.len() != probs.len() {
            return Err(DistributionError::LengthMismatch {
                support: support.len(),
                probs: probs.len(),
            });
        }
        for (index, (&z, &p)) in support.iter().zip(&probs).enumerate() {
            if !z.is_finite() || !p.is_finite() {
                return Err(DistributionError::NonFinite { index });
            }
            if p < 0.0 {
                return Err(DistributionError::NegativeProbability { index, prob: p });
            }
            if index > 0 && support[index - 1] >= z {
                return Err(DistributionError::Unsorted { index });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(DistributionError::MassNotOne { sum });
        }
        Ok(Self { support, probs })
    }

    /// Builds a distribution from unordered `(value, probability)` atoms,
    /// sorting them and merging atoms that share a value.
    pub fn from_atoms<I>(atoms: I) -> Result<Self, DistributionError>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        for (index, &(z, p)) in atoms.iter().enumerate() {
            if !z.is_finite() || !p.is_finite() {
                return Err(DistributionError::NonFinite { index });
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut probs: Vec<f64> = Vec::with_capacity(atoms.len());
        for (z, p) in atoms {
            match support.last() {
                Some(&last) if last == z => *probs.last_mut().unwrap() += p,
                _ => {
                    support.push(z);
                    probs.push(p);
                }
            }
        }
        Self::new(support, probs)
    }

    pub fn point_mass(value: f64) -> Result<Self, DistributionError> {
        Self::new(vec![value], vec![1.0])
    }

    /// Renormalizes nonnegative weights into a distribution.
    pub fn normalized(support: Vec<f64>, weights: Vec<f64>) -> Result<Self, DistributionError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(DistributionError::MassNotOne { sum: total });
        }
        let probs = weights.iter().map(|w| w / total).collect();
        Self::new(support, probs)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// `(value, probability)` pairs in ascending value order.
    pub fn atoms(&self) -> impl DoubleEndedIterator<Item = (f64, f64)> + ExactSizeIterator + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn min_value(&self) -> f64 {
        self.support[0]
    }

    pub fn max_value(&self) -> f64 {
        self.support[self.support.len() - 1]
    }

    /// Right-continuous distribution function `P(Z <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        let upto = self.support.partition_point(|&z| z <= t);
        if upto == self.support.len() {
            return 1.0;
        }
        self.probs[..upto].iter().sum::<f64>().min(1.0)
    }

    pub fn expectation(&self) -> f64 {
        self.atoms().map(|(z, p)| z * p).sum()
    }

    /// Law of `scale * Z + shift`. A zero scale collapses to a point mass.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self, DistributionError> {
        Self::from_atoms(self.atoms().map(|(z, p)| (scale * z + shift, p)))
    }
}

/// Action-parameterized loss family `x -> P(xi, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LossFamily {
    /// `n` computers, each locked independently with probability
    /// `1 - damping * x^2`; the loss is the number of locked computers.
    BinomialRansomware { computers: u32, damping: f64 },
    Tabulated(TabulatedFamily),
}

/// Grid of pmfs over one shared support, interpolated linearly in the action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedFamily {
    support: Vec<f64>,
    actions: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl TabulatedFamily {
    /// `actions` must be strictly increasing; each row is a pmf over `support`.
    /// Row masses within 1e-6 of one are renormalized.
    pub fn new(
        support: Vec<f64>,
        actions: Vec<f64>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, DistributionError> {
        if actions.is_empty() {
            return Err(DistributionError::Table("no grid actions".into()));
        }
        if actions.len() != rows.len() {
            return Err(DistributionError::Table(format!(
                "{} actions but {} pmf rows",
                actions.len(),
                rows.len()
            )));
        }
        if actions.windows(2).any(|w| !(w[0] < w[1])) || actions.iter().any(|a| !a.is_finite()) {
            return Err(DistributionError::Table(
                "grid actions must be finite and strictly increasing".into(),
            ));
        }
        if let Some(&value) = support.iter().find(|&&z| z < 0.0) {
            return Err(DistributionError::NegativeLoss { value });
        }
        let mut normalized = Vec::with_capacity(rows.len());
        for (row, &x) in rows.into_iter().zip(&actions) {
            if row.len() != support.len() {
                return Err(DistributionError::Table(format!(
                    "row at action {x} has {} entries, support has {}",
                    row.len(),
                    support.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_MASS_TOLERANCE {
                return Err(DistributionError::MassNotOne { sum });
            }
            let dist = DiscreteDistribution::normalized(support.clone(), row)?;
            normalized.push(dist.probs);
        }
        Ok(Self {
            support,
            actions,
            rows: normalized,
        })
    }

    /// Reads `x,<support values...>` header followed by one pmf row per action.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self, DistributionError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| DistributionError::Table(e.to_string()))?
            .clone();
        if headers.get(0) != Some("x") {
            return Err(DistributionError::Table(
                "first header column must be `x`".into(),
            ));
        }
        let support = headers
            .iter()
            .skip(1)
            .map(|h| {
                h.parse::<f64>()
                    .map_err(|_| DistributionError::Table(format!("bad support value `{h}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut actions = Vec::new();
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| DistributionError::Table(e.to_string()))?;
            let values = record
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| DistributionError::Table(format!("line {}: {e}", line + 2)))?;
            actions.push(values[0]);
            rows.push(values[1..].to_vec());
        }
        Self::new(support, actions, rows)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, DistributionError> {
        let file = std::fs::File::open(path)
            .map_err(|e| DistributionError::Table(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    fn pmf_at(&self, x: f64) -> Vec<f64> {
        let last = self.actions.len() - 1;
        if x <= self.actions[0] {
            return self.rows[0].clone();
        }
        if x >= self.actions[last] {
            return self.rows[last].clone();
        }
        let hi = self.actions.partition_point(|&a| a <= x);
        let lo = hi - 1;
        let t = (x - self.actions[lo]) / (self.actions[hi] - self.actions[lo]);
        self.rows[lo]
            .iter()
            .zip(&self.rows[hi])
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect()
    }
}

/// Loss model over the compact action set `[action_low, action_high]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterizedLossModel {
    action_low: f64,
    action_high: f64,
    family: LossFamily,
}

impl ParameterizedLossModel {
    pub fn new(
        action_low: f64,
        action_high: f64,
        family: LossFamily,
    ) -> Result<Self, DistributionError> {
        if !action_low.is_finite() || !action_high.is_finite() || action_low > action_high {
            return Err(DistributionError::InvalidActionSet {
                low: action_low,
                high: action_high,
            });
        }
        if let LossFamily::BinomialRansomware { computers, damping } = family {
            if computers == 0 {
                return Err(DistributionError::Parameter(
                    "computer count must be at least 1".into(),
                ));
            }
            if !damping.is_finite() {
                return Err(DistributionError::Parameter("damping must be finite".into()));
            }
            // the lock probability is monotone in |x|, so the extremes decide
            for x in [action_low, action_high, 0.0_f64.clamp(action_low, action_high)] {
                let prob = 1.0 - damping * x * x;
                if !(0.0..=1.0).contains(&prob) {
                    return Err(DistributionError::LockProbability { x, prob });
                }
            }
        }
        Ok(Self {
            action_low,
            action_high,
            family,
        })
    }

    /// The ransomware family on `X = [0, 1]`.
    pub fn binomial_ransomware(computers: u32, damping: f64) -> Result<Self, DistributionError> {
        Self::new(
            0.0,
            1.0,
            LossFamily::BinomialRansomware { computers, damping },
        )
    }

    pub fn tabulated(
        action_low: f64,
        action_high: f64,
        table: TabulatedFamily,
    ) -> Result<Self, DistributionError> {
        Self::new(action_low, action_high, LossFamily::Tabulated(table))
    }

    /// Tabulated family whose action set is the span of its grid.
    pub fn tabulated_over_grid(table: TabulatedFamily) -> Result<Self, DistributionError> {
        let low = table.actions[0];
        let high = *table.actions.last().unwrap();
        Self::tabulated(low, high, table)
    }

    pub fn action_low(&self) -> f64 {
        self.action_low
    }

    pub fn action_high(&self) -> f64 {
        self.action_high
    }

    pub fn action_width(&self) -> f64 {
        self.action_high - self.action_low
    }

    pub fn family(&self) -> &LossFamily {
        &self.family
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.action_low - ACTION_SLACK && x <= self.action_high + ACTION_SLACK
    }

    fn check_action(&self, x: f64) -> Result<f64, DistributionError> {
        if !x.is_finite() || !self.contains(x) {
            return Err(DistributionError::ActionOutOfRange {
                x,
                low: self.action_low,
                high: self.action_high,
            });
        }
        Ok(x.clamp(self.action_low, self.action_high))
    }

    /// Loss distribution when the user invests `x`.
    pub fn distribution_at(&self, x: f64) -> Result<DiscreteDistribution, DistributionError> {
        let x = self.check_action(x)?;
        match &self.family {
            LossFamily::BinomialRansomware { computers, damping } => {
                let prob = 1.0 - damping * x * x;
                if !(0.0..=1.0).contains(&prob) {
                    return Err(DistributionError::LockProbability { x, prob });
                }
                let support = (0..=*computers).map(f64::from).collect();
                DiscreteDistribution::normalized(support, binomial_pmf(*computers, prob))
            }
            LossFamily::Tabulated(table) => {
                DiscreteDistribution::normalized(table.support.clone(), table.pmf_at(x))
            }
        }
    }
}

/// Binomial pmf on `{0, ..., n}` evaluated in log space.
fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    let n_usize = n as usize;
    if p <= 0.0 {
        let mut pmf = vec![0.0; n_usize + 1];
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        let mut pmf = vec![0.0; n_usize + 1];
        pmf[n_usize] = 1.0;
        return pmf;
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let mut ln_choose = 0.0;
    (0..=n)
        .map(|k| {
            if k > 0 {
                ln_choose += f64::from(n - k + 1).ln() - f64::from(k).ln();
            }
            (ln_choose + f64::from(k) * ln_p + f64::from(n - k) * ln_q).exp()
        })
        .collect()
}

/// Outcome of a pointwise CDF comparison between two actions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FosdReport {
    pub x1: f64,
    pub x2: f64,
    pub holds: bool,
    /// Largest `F(t | x1) - F(t | x2)` over support points, floored at 0.
    pub worst_gap: f64,
    /// Loss value where the worst gap occurs.
    pub worst_at: Option<f64>,
}

/// Checks that investing `x2 >= x1` yields a dominated loss:
/// `F(t | x2) >= F(t | x1) - tol` at every support point.
pub fn check_fosd(
    model: &ParameterizedLossModel,
    x1: f64,
    x2: f64,
    tol: f64,
) -> Result<FosdReport, DistributionError> {
    if x1 > x2 {
        return Err(DistributionError::Parameter(format!(
            "dominance check needs x1 <= x2, got {x1} > {x2}"
        )));
    }
    let low = model.distribution_at(x1)?;
    let high = model.distribution_at(x2)?;
    let mut worst_gap = 0.0;
    let mut worst_at = None;
    let mut points: Vec<f64> = low.support().iter().chain(high.support()).copied().collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    for t in points {
        let gap = low.cdf(t) - high.cdf(t);
        if gap > worst_gap {
            worst_gap = gap;
            worst_at = Some(t);
        }
    }
    Ok(FosdReport {
        x1,
        x2,
        holds: worst_gap <= tol,
        worst_gap,
        worst_at,
    })
}

/// Second differences of every pmf entry along an action grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub step: f64,
    pub actions: Vec<f64>,
    /// `second_derivatives[i][k]` estimates `d^2 p(xi_k, x_i) / dx^2`.
    pub second_derivatives: Vec<Vec<f64>>,
    /// Most negative unscaled second difference seen.
    pub worst_difference: f64,
    pub worst_at: Option<(f64, f64)>,
    pub holds: bool,
}

/// Numerical check that `x -> p(xi, x)` is convex for every atom.
///
/// Each grid action uses a central stencil when `x +/- h` stays in the action
/// set, otherwise a one-sided stencil. An entry fails when its unscaled second
/// difference falls below `-tol`.
pub fn check_density_convexity(
    model: &ParameterizedLossModel,
    x_grid: &[f64],
    h: f64,
    tol: f64,
) -> Result<ConvexityReport, DistributionError> {
    if x_grid.len() < 3 {
        return Err(DistributionError::DegenerateGrid(format!(
            "need at least 3 actions, got {}",
            x_grid.len()
        )));
    }
    if !(h > 0.0) || 2.0 * h > model.action_width() {
        return Err(DistributionError::DegenerateGrid(format!(
            "step {h} does not fit in the action set"
        )));
    }
    let mut second_derivatives = Vec::with_capacity(x_grid.len());
    let mut worst_difference = 0.0_f64;
    let mut worst_at = None;
    for &x in x_grid {
        let x = model.check_action(x)?;
        let centre = if x - h < model.action_low {
            x + h
        } else if x + h > model.action_high {
            x - h
        } else {
            x
        };
        let lo = model.distribution_at(centre - h)?;
        let mid = model.distribution_at(centre)?;
        let hi = model.distribution_at(centre + h)?;
        let row: Vec<f64> = lo
            .probs()
            .iter()
            .zip(mid.probs())
            .zip(hi.probs())
            .map(|((a, b), c)| a - 2.0 * b + c)
            .collect();
        for (k, &diff) in row.iter().enumerate() {
            if diff < worst_difference {
                worst_difference = diff;
                worst_at = Some((x, mid.support()[k]));
            }
        }
        second_derivatives.push(row.into_iter().map(|d| d / (h * h)).collect());
    }
    Ok(ConvexityReport {
        step: h,
        actions: x_grid.to_vec(),
        second_derivatives,
        worst_difference,
        worst_at,
        holds: worst_difference >= -tol,
    })
}

/// `count` evenly spaced points on `[low, high]`, endpoints included.
pub fn linspace(low: f64, high: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![low],
        _ => {
            let step = (high - low) / (count - 1) as f64;
            (0..count)
                .map(|i| if i + 1 == count { high } else { low + step * i as f64 })
                .collect()
        }
    }
}
