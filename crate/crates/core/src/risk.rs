//! Coherent, law-invariant risk measures on discrete loss distributions.
//!
//! Every measure here is a function of the loss law alone, so evaluation
//! takes a [`DiscreteDistribution`]. Average value-at-risk also exposes its
//! dual form: a worst-case reweighting `zeta` of the reference probabilities
//! with `0 <= zeta <= 1/(1-a)` and `E[zeta] = 1`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{
    check_fosd, DiscreteDistribution, DistributionError, ParameterizedLossModel,
};

/// Maximum nesting depth of mixture measures.
pub const MAX_MIXTURE_DEPTH: usize = 8;

/// Default tolerance for equality-type checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("AV@R level must lie in [0, 1), got {0}")]
    Level(f64),
    #[error("semideviation weight must lie in [0, 1], got {0}")]
    Theta(f64),
    #[error("mixture weight must lie in [0, 1], got {0}")]
    Weight(f64),
    #[error("mixture nesting depth {0} exceeds {MAX_MIXTURE_DEPTH}")]
    Depth(usize),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Declarative description of a coherent risk measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RiskMeasureSpec {
    Expectation,
    /// Mean of the worst `1 - level` fraction of outcomes.
    Avar { level: f64 },
    /// `E[Z] + theta * E[(Z - E[Z])_+]`.
    AbsoluteSemideviation { theta: f64 },
    /// `weight * left + (1 - weight) * right`.
    Mixture {
        weight: f64,
        left: Box<RiskMeasureSpec>,
        right: Box<RiskMeasureSpec>,
    },
}

impl RiskMeasureSpec {
    pub fn avar(level: f64) -> Self {
        Self::Avar { level }
    }

    pub fn semideviation(theta: f64) -> Self {
        Self::AbsoluteSemideviation { theta }
    }

    pub fn mixture(weight: f64, left: RiskMeasureSpec, right: RiskMeasureSpec) -> Self {
        Self::Mixture {
            weight,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Depth of the measure tree; leaves have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Self::Mixture { left, right, .. } => 1 + left.depth().max(right.depth()),
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        let depth = self.depth();
        if depth > MAX_MIXTURE_DEPTH {
            return Err(RiskError::Depth(depth));
        }
        self.validate_params()
    }

    fn validate_params(&self) -> Result<(), RiskError> {
        match self {
            Self::Expectation => Ok(()),
            Self::Avar { level } => check_level(*level),
            Self::AbsoluteSemideviation { theta } => {
                if (0.0..=1.0).contains(theta) {
                    Ok(())
                } else {
                    Err(RiskError::Theta(*theta))
                }
            }
            Self::Mixture {
                weight,
                left,
                right,
            } => {
                if !(0.0..=1.0).contains(weight) {
                    return Err(RiskError::Weight(*weight));
                }
                left.validate_params()?;
                right.validate_params()
            }
        }
    }

    /// Risk of a loss with law `dist`. The spec is assumed valid.
    pub fn evaluate(&self, dist: &DiscreteDistribution) -> f64 {
        match self {
            Self::Expectation => dist.expectation(),
            Self::Avar { level } => avar(dist, *level),
            Self::AbsoluteSemideviation { theta } => {
                let mean = dist.expectation();
                let upper: f64 = dist.atoms().map(|(z, p)| (z - mean).max(0.0) * p).sum();
                mean + theta * upper
            }
            Self::Mixture {
                weight,
                left,
                right,
            } => weight * left.evaluate(dist) + (1.0 - weight) * right.evaluate(dist),
        }
    }

    /// Short human-readable label, e.g. `avar(0.95)`.
    pub fn label(&self) -> String {
        match self {
            Self::Expectation => "expectation".into(),
            Self::Avar { level } => format!("avar({level})"),
            Self::AbsoluteSemideviation { theta } => format!("semideviation({theta})"),
            Self::Mixture {
                weight,
                left,
                right,
            } => format!("mixture({weight}, {}, {})", left.label(), right.label()),
        }
    }
}

fn check_level(level: f64) -> Result<(), RiskError> {
    if (0.0..1.0).contains(&level) {
        Ok(())
    } else {
        Err(RiskError::Level(level))
    }
}

/// Exact discrete AV@R: fill the upper tail of mass `1 - level` from the
/// largest loss downward, splitting the boundary atom.
fn avar(dist: &DiscreteDistribution, level: f64) -> f64 {
    let tail = 1.0 - level;
    let mut remaining = tail;
    let mut acc = 0.0;
    for (z, p) in dist.atoms().rev() {
        if remaining <= 0.0 {
            break;
        }
        let take = p.min(remaining);
        acc += z * take;
        remaining -= take;
    }
    acc / tail
}

/// Worst-case density of an AV@R dual problem, aligned with the support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualDensity {
    pub weights: Vec<f64>,
}

impl DualDensity {
    /// `sum_i zeta_i p_i`, which equals 1 for a feasible density.
    pub fn mass(&self, dist: &DiscreteDistribution) -> f64 {
        self.weights.iter().zip(dist.probs()).map(|(w, p)| w * p).sum()
    }
}

/// Solution of the AV@R dual problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvarDual {
    pub value: f64,
    pub density: DualDensity,
    /// Loss value of the last atom receiving weight (the value-at-risk). It
    /// is the multiplier of the normalization constraint `E[zeta] = 1`.
    pub quantile: f64,
}

/// Maximizes `sum z_i zeta_i p_i` over `0 <= zeta_i <= 1/(1-a)`,
/// `sum zeta_i p_i = 1`, by filling the cap from the largest loss down.
pub fn dual_evaluate_avar(dist: &DiscreteDistribution, level: f64) -> Result<AvarDual, RiskError> {
    check_level(level)?;
    let cap = 1.0 / (1.0 - level);
    let mut weights = vec![0.0; dist.len()];
    let mut remaining = 1.0_f64;
    let mut quantile = dist.max_value();
    for (i, (z, p)) in dist.atoms().enumerate().rev() {
        if p <= 0.0 {
            continue;
        }
        quantile = z;
        // the atom that exhausts the budget is the quantile; rounding residue
        // must not push it further down
        if p * cap >= remaining * (1.0 - 1e-12) {
            weights[i] = cap.min(remaining / p);
            break;
        }
        weights[i] = cap;
        remaining -= cap * p;
    }
    let value = dist
        .atoms()
        .zip(&weights)
        .map(|((z, p), w)| z * w * p)
        .sum();
    Ok(AvarDual {
        value,
        density: DualDensity { weights },
        quantile,
    })
}

/// Random losses on one finite sample space, used by the axiom harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxiomSampler {
    pub min_outcomes: usize,
    pub max_outcomes: usize,
    /// Loss values are drawn uniformly from `[-value_scale, value_scale]`.
    pub value_scale: f64,
    /// Probability that an outcome gets zero mass.
    pub zero_mass_rate: f64,
}

impl Default for AxiomSampler {
    fn default() -> Self {
        Self {
            min_outcomes: 2,
            max_outcomes: 12,
            value_scale: 10.0,
            zero_mass_rate: 0.1,
        }
    }
}

impl AxiomSampler {
    fn probabilities(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = rng.gen_range(self.min_outcomes..=self.max_outcomes);
        let mut weights: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(self.zero_mass_rate) {
                    0.0
                } else {
                    rng.gen_range(0.01..1.0)
                }
            })
            .collect();
        if weights.iter().all(|&w| w == 0.0) {
            weights[0] = 1.0;
        }
        let total: f64 = weights.iter().sum();
        weights.iter().map(|w| w / total).collect()
    }

    fn values(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n)
            .map(|_| rng.gen_range(-self.value_scale..=self.value_scale))
            .collect()
    }
}

fn law(values: &[f64], probs: &[f64]) -> DiscreteDistribution {
    DiscreteDistribution::from_atoms(values.iter().copied().zip(probs.iter().copied()))
        .expect("sampled probabilities form a distribution")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomOutcome {
    pub max_violation: f64,
    pub passed: bool,
}

/// Randomized verification of the coherence axioms and of `rho >= E`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub measure: RiskMeasureSpec,
    pub seed: u64,
    pub trials: usize,
    pub tolerance: f64,
    pub axioms: BTreeMap<String, AxiomOutcome>,
    pub passed: bool,
}

pub const AXIOM_NAMES: [&str; 5] = [
    "monotonicity",
    "convexity",
    "translation_equivariance",
    "positive_homogeneity",
    "risk_aversion",
];

/// Checks monotonicity, convexity, translation equivariance, positive
/// homogeneity and `rho >= E` on `trials` random pairs of losses drawn on a
/// common sample space. Reports the largest violation of each.
pub fn check_axioms(
    spec: &RiskMeasureSpec,
    sampler: &AxiomSampler,
    trials: usize,
    tol: f64,
    seed: u64,
) -> AxiomReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0_f64; 5];
    for _ in 0..trials {
        let probs = sampler.probabilities(&mut rng);
        let n = probs.len();
        let z = sampler.values(n, &mut rng);
        let z_other = sampler.values(n, &mut rng);
        let rho = |values: &[f64]| spec.evaluate(&law(values, &probs));
        let rho_z = rho(&z);

        // A1: a pointwise smaller loss is never riskier
        let dominated: Vec<f64> = z
            .iter()
            .map(|v| v - rng.gen_range(0.0..sampler.value_scale))
            .collect();
        worst[0] = worst[0].max(rho(&dominated) - rho_z);

        // A2
        let t: f64 = rng.gen_range(0.0..=1.0);
        let blend: Vec<f64> = z
            .iter()
            .zip(&z_other)
            .map(|(a, b)| t * a + (1.0 - t) * b)
            .collect();
        worst[1] = worst[1].max(rho(&blend) - t * rho_z - (1.0 - t) * rho(&z_other));

        // A3
        let shift = rng.gen_range(-sampler.value_scale..=sampler.value_scale);
        let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
        worst[2] = worst[2].max((rho(&shifted) - rho_z - shift).abs());

        // A4, occasionally at t = 0
        let scale = if rng.gen_bool(0.05) {
            0.0
        } else {
            rng.gen_range(0.0..5.0)
        };
        let scaled: Vec<f64> = z.iter().map(|v| scale * v).collect();
        worst[3] = worst[3].max((rho(&scaled) - scale * rho_z).abs());

        let mean: f64 = z.iter().zip(&probs).map(|(v, p)| v * p).sum();
        worst[4] = worst[4].max(mean - rho_z);
    }
    let axioms: BTreeMap<String, AxiomOutcome> = AXIOM_NAMES
        .iter()
        .zip(worst)
        .map(|(name, max_violation)| {
            (
                (*name).to_string(),
                AxiomOutcome {
                    max_violation,
                    passed: max_violation <= tol,
                },
            )
        })
        .collect();
    let passed = axioms.values().all(|a| a.passed);
    AxiomReport {
        measure: spec.clone(),
        seed,
        trials,
        tolerance: tol,
        axioms,
        passed,
    }
}

/// Risk along an action grid, checked for the monotone response implied by
/// dominance consistency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceConsistencyReport {
    pub measure: RiskMeasureSpec,
    /// `(x, rho[xi | x])` for every grid action.
    pub values: Vec<(f64, f64)>,
    /// Consecutive pairs `(x_prev, x_next, increase)` where risk went up
    /// although the dominance shift held.
    pub violations: Vec<(f64, f64, f64)>,
    /// Consecutive pairs where the dominance shift itself failed; the
    /// monotonicity check is skipped for those.
    pub fosd_failures: Vec<(f64, f64)>,
    pub holds: bool,
}

/// Verifies that `x -> rho[xi | x]` does not increase across every
/// consecutive grid pair on which the loss shift is dominance-ordered.
pub fn check_dominance_consistency(
    spec: &RiskMeasureSpec,
    model: &ParameterizedLossModel,
    x_grid: &[f64],
    tol: f64,
) -> Result<DominanceConsistencyReport, RiskError> {
    if x_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(DistributionError::Parameter("action grid must be ascending".into()).into());
    }
    let values = x_grid
        .iter()
        .map(|&x| Ok((x, spec.evaluate(&model.distribution_at(x)?))))
        .collect::<Result<Vec<_>, RiskError>>()?;
    let mut violations = Vec::new();
    let mut fosd_failures = Vec::new();
    for pair in values.windows(2) {
        let ((x1, r1), (x2, r2)) = (pair[0], pair[1]);
        if !check_fosd(model, x1, x2, tol)?.holds {
            fosd_failures.push((x1, x2));
            continue;
        }
        if r2 > r1 + tol {
            violations.push((x1, x2, r2 - r1));
        }
    }
    Ok(DominanceConsistencyReport {
        measure: spec.clone(),
        values,
        holds: violations.is_empty(),
        violations,
        fosd_failures,
    })
}
