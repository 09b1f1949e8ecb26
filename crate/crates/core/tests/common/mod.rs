//! Instance generators and independent oracles shared by the integration tests.

#![allow(dead_code)]

use rand::Rng;
use riskcontract::distributions::{linspace, DiscreteDistribution, ParameterizedLossModel, TabulatedFamily};
use riskcontract::risk::RiskMeasureSpec;

pub const AVAR_LEVELS: [f64; 6] = [0.0, 0.25, 0.5, 0.75, 0.9, 0.99];
pub const THETAS: [f64; 3] = [0.0, 0.5, 1.0];

pub fn ransomware() -> ParameterizedLossModel {
    ParameterizedLossModel::binomial_ransomware(10, 0.8).unwrap()
}

/// Loss `0` or `loss`, the latter with probability `p0 exp(-k x)` on `[0, 1]`,
/// tabulated on 2001 actions. Every measure used in the tests is smooth and
/// convex in `x` on this family while `p0 <= 0.05`.
pub fn exponential_breach(loss: f64, p0: f64, k: f64) -> ParameterizedLossModel {
    let actions = linspace(0.0, 1.0, 2001);
    let rows = actions
        .iter()
        .map(|&x| {
            let p = p0 * (-k * x).exp();
            vec![1.0 - p, p]
        })
        .collect();
    let table = TabulatedFamily::new(vec![0.0, loss], actions, rows).unwrap();
    ParameterizedLossModel::tabulated_over_grid(table).unwrap()
}

/// Pmf interpolated linearly between `low` at `x = 0` and `high` at `x = 1`.
pub fn affine_family(support: Vec<f64>, low: Vec<f64>, high: Vec<f64>) -> ParameterizedLossModel {
    let table = TabulatedFamily::new(support, vec![0.0, 1.0], vec![low, high]).unwrap();
    ParameterizedLossModel::tabulated_over_grid(table).unwrap()
}

/// Random pmf with some zero entries, never all zero.
pub fn random_pmf<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.0..1.0) })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[rng.gen_range(0..n)] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// Random affine family whose loss shrinks in dominance order as `x` grows:
/// mass moves toward the top atom at `x = 0` and toward the bottom at `x = 1`.
pub fn random_dominated_affine<R: Rng>(rng: &mut R) -> ParameterizedLossModel {
    let n = rng.gen_range(2..=6);
    let mut support: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
    support.sort_by(f64::total_cmp);
    support.dedup();
    let n = support.len();
    let base = random_pmf(n, rng);
    let lambda = rng.gen_range(0.0..1.0);
    let mu = rng.gen_range(0.0..1.0);
    let mut low: Vec<f64> = base.iter().map(|p| lambda * p).collect();
    low[n - 1] += 1.0 - lambda;
    let mut high: Vec<f64> = base.iter().map(|p| mu * p).collect();
    high[0] += 1.0 - mu;
    affine_family(support, low, high)
}

/// `min_t t + E[(Z - t)_+] / (1 - a)`; the minimum is attained at an atom.
pub fn avar_oracle(dist: &DiscreteDistribution, level: f64) -> f64 {
    if level == 0.0 {
        return dist.expectation();
    }
    dist.support()
        .iter()
        .map(|&t| {
            let excess: f64 = dist
                .atoms()
                .map(|(z, p)| p * (z - t).max(0.0))
                .sum();
            t + excess / (1.0 - level)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Random measure tree of depth at most `depth` over the tested leaves.
pub fn random_measure<R: Rng>(depth: usize, rng: &mut R) -> RiskMeasureSpec {
    if depth <= 1 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..3) {
            0 => RiskMeasureSpec::Expectation,
            1 => RiskMeasureSpec::avar(AVAR_LEVELS[rng.gen_range(0..AVAR_LEVELS.len())]),
            _ => RiskMeasureSpec::semideviation(THETAS[rng.gen_range(0..THETAS.len())]),
        };
    }
    RiskMeasureSpec::mixture(
        rng.gen_range(0.0..=1.0),
        random_measure(depth - 1, rng),
        random_measure(depth - 1, rng),
    )
}

/// AV@R levels, semideviation weights and `count` random mixtures of depth <= 3.
pub fn tested_measures<R: Rng>(count: usize, rng: &mut R) -> Vec<RiskMeasureSpec> {
    let mut out: Vec<RiskMeasureSpec> = AVAR_LEVELS.iter().map(|&a| RiskMeasureSpec::avar(a)).collect();
    out.extend(THETAS.iter().map(|&t| RiskMeasureSpec::semideviation(t)));
    let mut mixtures = 0;
    while mixtures < count {
        let m = random_measure(3, rng);
        if matches!(m, RiskMeasureSpec::Mixture { .. }) {
            out.push(m);
            mixtures += 1;
        }
    }
    out
}

/// Slope of `f` at `x` by a central difference, or a second-order one-sided
/// difference where the central one would leave `[low, high]`.
pub fn secant_slope<F: Fn(f64) -> f64>(f: F, x: f64, low: f64, high: f64, h: f64) -> f64 {
    if x - h < low {
        (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h)
    } else if x + h > high {
        (3.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h)) / (2.0 * h)
    } else {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }
}
