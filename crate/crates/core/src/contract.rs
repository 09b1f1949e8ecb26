//! Linear insurance contracts under hidden action.
//!
//! The insurer offers coverage `c` of the loss for an upfront premium `q`;
//! the user then picks a protection investment `x` at unit cost `m` that the
//! insurer cannot observe. Both parties evaluate risk with coherent measures,
//! so translation equivariance and positive homogeneity reduce the objectives
//! to `(1-c) rho_u[xi|x] + m x + q` for the user and `c rho_i[xi|x] - q` for
//! the insurer.
//!
//! The solver follows the first-order approach. The user's stationarity
//! condition `(1-c) d rho_u/dx + m = 0` pins the coverage at every action,
//! the binding participation constraint pins the premium, and what remains
//! is a one-dimensional search over `x`. Where the user's risk has a kink the
//! one-sided slopes replace stationarity: a convex kink admits an interval
//! of coverages and the insurer takes the cheaper end, a concave kink admits
//! none. [`brute_force_bilevel`] solves the original nested problem by
//! exhaustive search and serves as the oracle.

use serde::Serialize;
use thiserror::Error;

use crate::distributions::{
    check_density_convexity, check_fosd, linspace, DistributionError, ParameterizedLossModel,
};
use crate::risk::{RiskError, RiskMeasureSpec};
use crate::search::{argmin, grid_then_golden};
use crate::sensitivity::{
    default_step, risk_derivative_fd, DerivativeEstimate, SensitivityError,
};

/// Premiums at or below this are treated as non-positive.
pub const PREMIUM_FLOOR: f64 = 1e-12;

/// Points used for the density-convexity diagnostic in solver reports.
const CONVEXITY_PROBE_POINTS: usize = 21;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractError {
    #[error("invalid problem: {0}")]
    InvalidSpec(String),
    #[error("invalid contract: {0}")]
    InvalidContract(String),
    #[error("no feasible contract at x = {x}: {reason}")]
    Infeasible { x: f64, reason: Infeasibility },
    #[error("no feasible contract on the action grid ({} infeasible points)", reasons.len())]
    NoContract { reasons: Vec<(f64, Infeasibility)> },
    #[error("reduced objective forms disagree at x = {x}: {first} vs {second}")]
    ReductionMismatch { x: f64, first: f64, second: f64 },
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Risk(#[from] RiskError),
}

/// Why an action admits no contract.
#[derive(Debug, Error, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Infeasibility {
    /// The user's risk does not decrease with investment here.
    #[error("risk not decreasing in the action (derivative {derivative})")]
    FlatRisk { derivative: f64 },
    /// Risk falls more slowly than the investment cost; coverage would be negative.
    #[error("under-sensitive risk (coverage {coverage})")]
    UnderSensitive { coverage: f64 },
    #[error("non-positive premium ({premium})")]
    NonPositivePremium { premium: f64 },
    /// The user's risk bends downward here, so no coverage makes this action
    /// a best response.
    #[error("concave kink (slopes {left} then {right})")]
    ConcaveKink { left: f64, right: f64 },
}

/// Coverage rate and premium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contract {
    pub coverage: f64,
    pub premium: f64,
}

impl Contract {
    pub fn new(coverage: f64, premium: f64) -> Result<Self, ContractError> {
        if !(0.0..=1.0).contains(&coverage) {
            return Err(ContractError::InvalidContract(format!(
                "coverage {coverage} outside [0, 1]"
            )));
        }
        if !(premium > 0.0) || !premium.is_finite() {
            return Err(ContractError::InvalidContract(format!(
                "premium {premium} must be positive"
            )));
        }
        Ok(Self { coverage, premium })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Equality checks between two evaluations of the same quantity.
    pub equality: f64,
    /// Comparisons between derivative estimates.
    pub derivative: f64,
    /// Dominance and convexity diagnostics.
    pub diagnostic: f64,
    /// Bracket width at which golden-section refinement stops.
    pub search: f64,
    /// Finite-difference step; `None` uses 1e-4 of the action-set width.
    pub step: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            equality: 1e-9,
            derivative: 1e-6,
            diagnostic: 1e-9,
            search: 1e-10,
            step: None,
        }
    }
}

/// One contract design problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub insurer: RiskMeasureSpec,
    pub user: RiskMeasureSpec,
    pub model: ParameterizedLossModel,
    /// Cost per unit of protection investment.
    pub unit_cost: f64,
    /// Points in the action grid used by the solvers.
    pub grid_points: usize,
    pub tolerances: Tolerances,
}

impl ProblemSpec {
    pub fn new(
        insurer: RiskMeasureSpec,
        user: RiskMeasureSpec,
        model: ParameterizedLossModel,
        unit_cost: f64,
    ) -> Result<Self, ContractError> {
        Self {
            insurer,
            user,
            model,
            unit_cost,
            grid_points: 1001,
            tolerances: Tolerances::default(),
        }
        .validated()
    }

    pub fn with_grid_points(mut self, grid_points: usize) -> Result<Self, ContractError> {
        self.grid_points = grid_points;
        self.validated()
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Result<Self, ContractError> {
        self.tolerances = tolerances;
        self.validated()
    }

    fn validated(self) -> Result<Self, ContractError> {
        if !(self.unit_cost > 0.0) || !self.unit_cost.is_finite() {
            return Err(ContractError::InvalidSpec(format!(
                "unit cost must be positive, got {}",
                self.unit_cost
            )));
        }
        if self.grid_points < 3 {
            return Err(ContractError::InvalidSpec(format!(
                "grid needs at least 3 points, got {}",
                self.grid_points
            )));
        }
        if !(self.model.action_width() > 0.0) {
            return Err(ContractError::InvalidSpec(
                "action set must have positive width".into(),
            ));
        }
        if let Some(step) = self.tolerances.step {
            if !(step > 0.0) {
                return Err(ContractError::InvalidSpec(format!(
                    "finite-difference step must be positive, got {step}"
                )));
            }
        }
        self.insurer.validate()?;
        self.user.validate()?;
        Ok(self)
    }

    pub fn step(&self) -> f64 {
        self.tolerances.step.unwrap_or_else(|| default_step(&self.model))
    }

    pub fn grid(&self) -> Vec<f64> {
        linspace(
            self.model.action_low(),
            self.model.action_high(),
            self.grid_points,
        )
    }

    /// Width of one solver grid cell.
    pub fn grid_cell(&self) -> f64 {
        self.model.action_width() / (self.grid_points - 1) as f64
    }

    pub fn user_risk(&self, x: f64) -> Result<f64, ContractError> {
        Ok(self.user.evaluate(&self.model.distribution_at(x)?))
    }

    pub fn insurer_risk(&self, x: f64) -> Result<f64, ContractError> {
        Ok(self.insurer.evaluate(&self.model.distribution_at(x)?))
    }

    pub fn user_derivative(&self, x: f64) -> Result<DerivativeEstimate, ContractError> {
        Ok(risk_derivative_fd(&self.user, &self.model, x, self.step())?)
    }

    pub fn insurer_derivative(&self, x: f64) -> Result<DerivativeEstimate, ContractError> {
        Ok(risk_derivative_fd(&self.insurer, &self.model, x, self.step())?)
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// `(1-c) rho_u[xi|x] + m x + q`.
pub fn user_objective(
    spec: &ProblemSpec,
    contract: &Contract,
    x: f64,
) -> Result<f64, ContractError> {
    let value =
        (1.0 - contract.coverage) * spec.user_risk(x)? + spec.unit_cost * x + contract.premium;
    debug_assert!(
        close(value, user_objective_direct(spec, contract, x)?, 1e-9),
        "user objective reduction broke at x = {x}"
    );
    Ok(value)
}

/// `rho_u` applied to the transformed loss `(1-c) xi + m x + q` itself.
pub fn user_objective_direct(
    spec: &ProblemSpec,
    contract: &Contract,
    x: f64,
) -> Result<f64, ContractError> {
    let retained = spec.model.distribution_at(x)?.affine(
        1.0 - contract.coverage,
        spec.unit_cost * x + contract.premium,
    )?;
    Ok(spec.user.evaluate(&retained))
}

/// `c rho_i[xi|x] - q`.
pub fn insurer_objective(
    spec: &ProblemSpec,
    contract: &Contract,
    x: f64,
) -> Result<f64, ContractError> {
    let value = contract.coverage * spec.insurer_risk(x)? - contract.premium;
    debug_assert!(
        close(value, insurer_objective_direct(spec, contract, x)?, 1e-9),
        "insurer objective reduction broke at x = {x}"
    );
    Ok(value)
}

/// `rho_i` applied to the transformed loss `c xi - q` itself.
pub fn insurer_objective_direct(
    spec: &ProblemSpec,
    contract: &Contract,
    x: f64,
) -> Result<f64, ContractError> {
    let covered = spec
        .model
        .distribution_at(x)?
        .affine(contract.coverage, -contract.premium)?;
    Ok(spec.insurer.evaluate(&covered))
}

/// Reservation outcome: the user's best response without insurance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineResult {
    pub x0: f64,
    /// `min_x rho_u[xi|x] + m x`.
    pub u_bar: f64,
}

/// Minimizes `rho_u[xi|x] + m x` by a grid scan and golden-section refinement.
pub fn solve_baseline(spec: &ProblemSpec) -> Result<BaselineResult, ContractError> {
    let grid = spec.grid();
    let mut failure = None;
    let objective = |x: f64| match spec.user_risk(x) {
        Ok(r) => r + spec.unit_cost * x,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let best = grid_then_golden(objective, &grid, spec.tolerances.search);
    if let Some(e) = failure {
        return Err(e);
    }
    let (x0, u_bar) = best.expect("risk is finite on a compact action set");
    Ok(BaselineResult { x0, u_bar })
}

/// Coverage that makes `x` stationary for the user:
/// `c = 1 + m / (d rho_u / dx)`.
pub fn coverage_from_derivative(unit_cost: f64, derivative: f64) -> Result<f64, Infeasibility> {
    if !(derivative < 0.0) {
        return Err(Infeasibility::FlatRisk { derivative });
    }
    let coverage = 1.0 + unit_cost / derivative;
    if coverage < 0.0 {
        return Err(Infeasibility::UnderSensitive { coverage });
    }
    Ok(coverage)
}

/// Premium from the binding participation constraint
/// `(1-c) rho_u + m x + q = u_bar`.
pub fn premium_from_binding_ir(
    u_bar: f64,
    unit_cost: f64,
    x: f64,
    coverage: f64,
    user_risk: f64,
) -> Result<f64, Infeasibility> {
    let premium = u_bar - unit_cost * x - (1.0 - coverage) * user_risk;
    if premium <= PREMIUM_FLOOR {
        return Err(Infeasibility::NonPositivePremium { premium });
    }
    Ok(premium)
}

/// `u_bar - m x - c rho_u`: the premium when the covered share, rather than
/// the retained share, is subtracted. Reported next to the binding-IR premium.
pub fn alternate_premium(u_bar: f64, unit_cost: f64, x: f64, coverage: f64, user_risk: f64) -> f64 {
    u_bar - unit_cost * x - coverage * user_risk
}

pub fn feasible_coverage(spec: &ProblemSpec, x: f64) -> Result<f64, ContractError> {
    let d = spec.user_derivative(x)?;
    coverage_from_derivative(spec.unit_cost, d.value)
        .map_err(|reason| ContractError::Infeasible { x, reason })
}

pub fn feasible_premium(
    spec: &ProblemSpec,
    x: f64,
    coverage: f64,
    baseline: &BaselineResult,
) -> Result<f64, ContractError> {
    if !(0.0..=1.0).contains(&coverage) {
        return Err(ContractError::InvalidContract(format!(
            "coverage {coverage} outside [0, 1]"
        )));
    }
    premium_from_binding_ir(baseline.u_bar, spec.unit_cost, x, coverage, spec.user_risk(x)?)
        .map_err(|reason| ContractError::Infeasible { x, reason })
}

/// Both algebraic forms of the reduced objective once `c` is eliminated.
fn reduced_forms(insurer_risk: f64, user_risk: f64, derivative: f64, unit_cost: f64, x: f64) -> (f64, f64) {
    let ratio = unit_cost / derivative;
    let eliminated = (1.0 + ratio) * insurer_risk - ratio * user_risk + unit_cost * x;
    let gap_form = (insurer_risk - user_risk) * (1.0 + ratio) + user_risk + unit_cost * x;
    (eliminated, gap_form)
}

/// `U'(x) = D(x) (1 + m / rho_u'(x)) + rho_u(x) + m x` with
/// `D = rho_i - rho_u`, checked against the form before simplification.
pub fn reduced_objective(spec: &ProblemSpec, x: f64) -> Result<f64, ContractError> {
    feasible_coverage(spec, x)?;
    let derivative = spec.user_derivative(x)?.value;
    let (first, second) = reduced_forms(
        spec.insurer_risk(x)?,
        spec.user_risk(x)?,
        derivative,
        spec.unit_cost,
        x,
    );
    if !close(first, second, spec.tolerances.equality) {
        return Err(ContractError::ReductionMismatch { x, first, second });
    }
    Ok(second)
}

/// `rho~[xi|x] + m x` with the compromise measure `c rho_i + (1-c) rho_u`.
pub fn compromise_objective(spec: &ProblemSpec, coverage: f64, x: f64) -> Result<f64, ContractError> {
    if !(0.0..=1.0).contains(&coverage) {
        return Err(ContractError::InvalidContract(format!(
            "coverage {coverage} outside [0, 1]"
        )));
    }
    let blended = RiskMeasureSpec::mixture(coverage, spec.insurer.clone(), spec.user.clone());
    Ok(blended.evaluate(&spec.model.distribution_at(x)?) + spec.unit_cost * x)
}

/// Everything the first-order solver knows about one action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidatePoint {
    pub x: f64,
    pub derivative: DerivativeEstimate,
    pub user_risk: f64,
    pub insurer_risk: f64,
    pub coverage: f64,
    pub premium: f64,
    /// `U'(x)`; the insurer's objective is this minus `u_bar`.
    pub reduced_objective: f64,
}

/// Coverages that make a kink of the user's risk a local best response:
/// `(1-c) left + m <= 0 <= (1-c) right + m`, intersected with `[0, 1]`.
/// A concave kink (`right < left`) is never a local minimum of the user's
/// objective.
pub fn kink_coverage_range(
    unit_cost: f64,
    left: f64,
    right: f64,
) -> Result<(f64, f64), Infeasibility> {
    if right < left {
        return Err(Infeasibility::ConcaveKink { left, right });
    }
    let high = coverage_from_derivative(unit_cost, left)?;
    let low = if right < 0.0 {
        (1.0 + unit_cost / right).max(0.0)
    } else {
        0.0
    };
    Ok((low, high))
}

/// Distance from zero to the user's one-sided slopes `(1-c) rho_u' + m`; at
/// a smooth point this is `|(1-c) rho_u' + m|`.
pub fn stationarity_residual(unit_cost: f64, coverage: f64, derivative: &DerivativeEstimate) -> f64 {
    match (derivative.kink, derivative.left, derivative.right) {
        (true, Some(left), Some(right)) => {
            let a = (1.0 - coverage) * left + unit_cost;
            let b = (1.0 - coverage) * right + unit_cost;
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            if lo > 0.0 {
                lo
            } else if hi < 0.0 {
                -hi
            } else {
                0.0
            }
        }
        _ => ((1.0 - coverage) * derivative.value + unit_cost).abs(),
    }
}

fn candidate(
    spec: &ProblemSpec,
    baseline: &BaselineResult,
    x: f64,
) -> Result<Result<CandidatePoint, Infeasibility>, ContractError> {
    let m = spec.unit_cost;
    let derivative = spec.user_derivative(x)?;
    let user_risk = spec.user_risk(x)?;
    let insurer_risk = spec.insurer_risk(x)?;
    let coverage = match (derivative.kink, derivative.left, derivative.right) {
        (true, Some(left), Some(right)) => match kink_coverage_range(m, left, right) {
            // the insurer's objective is linear in c once the premium binds
            Ok((low, high)) if insurer_risk >= user_risk => low.min(high),
            Ok((_, high)) => high,
            Err(reason) => return Ok(Err(reason)),
        },
        _ => match coverage_from_derivative(m, derivative.value) {
            Ok(c) => c,
            Err(reason) => return Ok(Err(reason)),
        },
    };
    let premium = match premium_from_binding_ir(baseline.u_bar, m, x, coverage, user_risk) {
        Ok(q) => q,
        Err(reason) => return Ok(Err(reason)),
    };
    let reduced = if coverage < 1.0 {
        // slope that the chosen coverage makes stationary
        let slope = -m / (1.0 - coverage);
        let (first, second) = reduced_forms(insurer_risk, user_risk, slope, m, x);
        if !close(first, second, spec.tolerances.equality) {
            return Err(ContractError::ReductionMismatch { x, first, second });
        }
        second
    } else {
        insurer_risk + m * x
    };
    Ok(Ok(CandidatePoint {
        x,
        derivative,
        user_risk,
        insurer_risk,
        coverage,
        premium,
        reduced_objective: reduced,
    }))
}

/// Sufficient conditions for insurance to raise investment,
/// checked on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficientConditions {
    /// Insurer at least as risk-averse as the user everywhere.
    pub c1_holds: bool,
    /// Insurer's risk at least as sensitive to investment as the user's.
    pub c2_holds: bool,
    /// Smallest `rho_i - rho_u` on the grid.
    pub worst_c1_margin: f64,
    /// Smallest `|rho_i'| - |rho_u'|` on the grid.
    pub worst_c2_margin: f64,
    /// `(x, D(x) = rho_i - rho_u)`.
    pub d_profile: Vec<(f64, f64)>,
}

pub fn check_theorem_conditions(
    spec: &ProblemSpec,
    x_grid: &[f64],
) -> Result<SufficientConditions, ContractError> {
    let mut worst_c1_margin = f64::INFINITY;
    let mut worst_c2_margin = f64::INFINITY;
    let mut d_profile = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let gap = spec.insurer_risk(x)? - spec.user_risk(x)?;
        d_profile.push((x, gap));
        worst_c1_margin = worst_c1_margin.min(gap);
        let sensitivity =
            spec.insurer_derivative(x)?.value.abs() - spec.user_derivative(x)?.value.abs();
        worst_c2_margin = worst_c2_margin.min(sensitivity);
    }
    Ok(SufficientConditions {
        c1_holds: worst_c1_margin >= -spec.tolerances.equality,
        c2_holds: worst_c2_margin >= -spec.tolerances.derivative,
        worst_c1_margin,
        worst_c2_margin,
        d_profile,
    })
}

/// Solver output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub x0: f64,
    #[serde(rename = "U_bar")]
    pub u_bar: f64,
    pub x_star: f64,
    pub c_star: f64,
    pub q_star: f64,
    pub insurer_objective: f64,
    pub user_objective: f64,
    pub ir_gap: f64,
    /// `|(1 - c*) rho_u'(x*) + m|`, or the distance from zero to the
    /// one-sided slopes when `x*` is a kink.
    pub stationarity_residual: f64,
    pub user_kink: bool,
    pub c1_holds: bool,
    pub c2_holds: bool,
    pub security_enhanced: bool,
    pub fosd_holds: bool,
    pub density_convex: bool,
    /// `u_bar - m x* - c* rho_u(x*)`, see [`alternate_premium`].
    pub alternate_premium: f64,
    pub feasible_points: usize,
    pub grid_points: usize,
    #[serde(rename = "D_profile")]
    pub d_profile: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn contract(&self) -> Contract {
        Contract {
            coverage: self.c_star,
            premium: self.q_star,
        }
    }

    pub fn baseline(&self) -> BaselineResult {
        BaselineResult {
            x0: self.x0,
            u_bar: self.u_bar,
        }
    }
}

/// Dominance shift on consecutive grid pairs; returns the first failing pair.
fn first_fosd_failure(spec: &ProblemSpec, grid: &[f64]) -> Result<Option<(f64, f64)>, ContractError> {
    for pair in grid.windows(2) {
        if !check_fosd(&spec.model, pair[0], pair[1], spec.tolerances.diagnostic)?.holds {
            return Ok(Some((pair[0], pair[1])));
        }
    }
    Ok(None)
}

/// Solves the reduced hidden-action problem over the feasible actions.
pub fn solve_contract(spec: &ProblemSpec) -> Result<SolveReport, ContractError> {
    let baseline = solve_baseline(spec)?;
    solve_contract_with_baseline(spec, &baseline)
}

pub fn solve_contract_with_baseline(
    spec: &ProblemSpec,
    baseline: &BaselineResult,
) -> Result<SolveReport, ContractError> {
    let grid = spec.grid();
    let mut reasons = Vec::new();
    let mut values = Vec::with_capacity(grid.len());
    for &x in &grid {
        match candidate(spec, baseline, x)? {
            Ok(point) => values.push(point.reduced_objective),
            Err(reason) => {
                reasons.push((x, reason));
                values.push(f64::NAN);
            }
        }
    }
    let feasible_points = grid.len() - reasons.len();
    let Some(k) = argmin(&values) else {
        return Err(ContractError::NoContract { reasons });
    };

    let mut best = candidate(spec, baseline, grid[k])?.expect("grid point was feasible");
    let lo = grid[k.saturating_sub(1)];
    let hi = grid[(k + 1).min(grid.len() - 1)];
    let mut failure = None;
    let refined = grid_then_golden(
        |x| match candidate(spec, baseline, x) {
            Ok(Ok(point)) => point.reduced_objective,
            Ok(Err(_)) => f64::INFINITY,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        &[lo, grid[k], hi],
        spec.tolerances.search,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some((x, value)) = refined {
        if value < best.reduced_objective {
            if let Ok(point) = candidate(spec, baseline, x)? {
                best = point;
            }
        }
    }

    let contract = Contract::new(best.coverage, best.premium)?;
    let x_star = best.x;
    let insurer_value = insurer_objective(spec, &contract, x_star)?;
    let user_value = user_objective(spec, &contract, x_star)?;
    let conditions = check_theorem_conditions(spec, &grid)?;

    let mut warnings = Vec::new();
    let fosd_failure = first_fosd_failure(spec, &grid)?;
    if let Some((a, b)) = fosd_failure {
        warnings.push(format!(
            "loss shift is not dominance-ordered between x = {a} and x = {b}"
        ));
    }
    let probe = linspace(
        spec.model.action_low(),
        spec.model.action_high(),
        CONVEXITY_PROBE_POINTS,
    );
    let convexity = check_density_convexity(
        &spec.model,
        &probe,
        10.0 * spec.step(),
        spec.tolerances.diagnostic,
    )?;
    if !convexity.holds {
        let (x, z) = convexity.worst_at.unwrap_or_default();
        warnings.push(format!(
            "loss pmf is not convex in the action (worst at x = {x}, loss {z})"
        ));
    }
    if best.derivative.kink {
        warnings.push(format!(
            "user risk has a kink at x* = {x_star}; coverage comes from the one-sided slopes"
        ));
    }
    let cell = spec.grid_cell();
    if x_star <= spec.model.action_low() + cell || x_star >= spec.model.action_high() - cell {
        warnings.push("x* lies at the edge of the action set; interior stationarity is not guaranteed".into());
    }
    if best.premium < 1e-6 * baseline.u_bar.abs().max(1.0) {
        warnings.push("premium is near zero; the optimum sits on the participation boundary".into());
    }

    Ok(SolveReport {
        x0: baseline.x0,
        u_bar: baseline.u_bar,
        x_star,
        c_star: contract.coverage,
        q_star: contract.premium,
        insurer_objective: insurer_value,
        user_objective: user_value,
        ir_gap: (user_value - baseline.u_bar).abs(),
        stationarity_residual: stationarity_residual(
            spec.unit_cost,
            contract.coverage,
            &best.derivative,
        ),
        user_kink: best.derivative.kink,
        c1_holds: conditions.c1_holds,
        c2_holds: conditions.c2_holds,
        security_enhanced: x_star >= baseline.x0 - cell,
        fosd_holds: fosd_failure.is_none(),
        density_convex: convexity.holds,
        alternate_premium: alternate_premium(
            baseline.u_bar,
            spec.unit_cost,
            x_star,
            contract.coverage,
            best.user_risk,
        ),
        feasible_points,
        grid_points: grid.len(),
        d_profile: conditions.d_profile,
        warnings,
    })
}

/// One coverage level of the exhaustive search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleRow {
    pub coverage: f64,
    /// User's best response on the action grid.
    pub x: f64,
    pub premium: f64,
    /// `c rho_i - q`, meaningful only when `feasible`.
    pub objective: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub best: Option<OracleRow>,
    pub rows: Vec<OracleRow>,
    pub discarded: usize,
}

/// Exhaustive search of the nested problem.
///
/// For each coverage level the user's best response is the grid argmin of
/// `(1-c) rho_u + m x` (ties to the smallest action); the premium follows from
/// the binding participation constraint and non-positive premiums are
/// discarded. The best row minimizes the insurer's objective `c rho_i - q`.
pub fn brute_force_bilevel(
    spec: &ProblemSpec,
    baseline: &BaselineResult,
    c_grid: &[f64],
    x_grid: &[f64],
) -> Result<OracleReport, ContractError> {
    let user: Vec<f64> = x_grid
        .iter()
        .map(|&x| spec.user_risk(x))
        .collect::<Result<_, _>>()?;
    let insurer: Vec<f64> = x_grid
        .iter()
        .map(|&x| spec.insurer_risk(x))
        .collect::<Result<_, _>>()?;
    let m = spec.unit_cost;
    let mut rows = Vec::with_capacity(c_grid.len());
    let mut best: Option<OracleRow> = None;
    let mut discarded = 0;
    let mut inner = vec![0.0; x_grid.len()];
    for &c in c_grid {
        for (slot, (&x, &r)) in inner.iter_mut().zip(x_grid.iter().zip(&user)) {
            *slot = (1.0 - c) * r + m * x;
        }
        let Some(j) = argmin(&inner) else { continue };
        let x = x_grid[j];
        let premium = baseline.u_bar - m * x - (1.0 - c) * user[j];
        let feasible = premium > PREMIUM_FLOOR;
        let row = OracleRow {
            coverage: c,
            x,
            premium,
            objective: c * insurer[j] - premium,
            feasible,
        };
        if feasible {
            if best.map_or(true, |b| row.objective < b.objective) {
                best = Some(row);
            }
        } else {
            discarded += 1;
        }
        rows.push(row);
    }
    Ok(OracleReport {
        best,
        rows,
        discarded,
    })
}
