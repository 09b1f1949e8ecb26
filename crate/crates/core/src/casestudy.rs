//! Ransomware scenario: `n` computers, each locked independently with
//! probability `1 - kappa x^2`, loss equal to the number of locked computers.
//!
//! Two sweeps are provided. The coverage sweep varies the user's AV@R level
//! and records the coverage rate that keeps the user's action stationary; the
//! premium sweep fixes the level and varies the action. [`monotone_segments`]
//! splits a swept column into maximal nondecreasing runs. For AV@R the run
//! boundaries sit where the level-`a` quantile moves between atoms of the loss
//! distribution, because the worst-case density jumps there.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{
    coverage_from_derivative, premium_from_binding_ir, solve_baseline, ContractError,
    Infeasibility, ProblemSpec, Tolerances,
};
use crate::distributions::{linspace, DistributionError, ParameterizedLossModel, DEFAULT_DAMPING};
use crate::risk::RiskMeasureSpec;

/// Tolerance for nondecreasing steps inside a segment.
pub const SEGMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseStudyError {
    #[error("invalid case-study config: {0}")]
    Config(String),
    #[error("segment analysis needs at least 2 feasible rows, got {0}")]
    TooFewRows(usize),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Which action the coverage sweep evaluates at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum CoverageMode {
    /// The user's uninsured best response at each level.
    AtBaseline,
    /// One action for every level.
    FixedX { x: f64 },
}

impl Default for CoverageMode {
    fn default() -> Self {
        Self::AtBaseline
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStudyConfig {
    pub computers: u32,
    pub damping: f64,
    pub unit_cost: f64,
    /// User AV@R levels for the coverage sweep.
    pub user_avar_levels: Vec<f64>,
    /// User AV@R level for the premium sweep.
    pub premium_user_level: f64,
    /// Carried into the problem specs; the sweeps themselves only use the user side.
    pub insurer: RiskMeasureSpec,
    /// Actions for the premium sweep.
    pub x_grid: Vec<f64>,
    pub coverage_mode: CoverageMode,
    /// Grid used when solving for the baseline action.
    pub baseline_grid_points: usize,
    pub tolerances: Tolerances,
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        Self {
            computers: 10,
            damping: DEFAULT_DAMPING,
            unit_cost: 2.0,
            user_avar_levels: linspace(0.0, 0.95, 41),
            premium_user_level: 0.5,
            insurer: RiskMeasureSpec::avar(0.95),
            x_grid: linspace(0.0, 1.0, 41),
            coverage_mode: CoverageMode::AtBaseline,
            baseline_grid_points: 1001,
            tolerances: Tolerances::default(),
        }
    }
}

impl CaseStudyConfig {
    pub fn validate(&self) -> Result<(), CaseStudyError> {
        if self.computers == 0 {
            return Err(CaseStudyError::Config("need at least one computer".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(CaseStudyError::Config(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.unit_cost > 0.0) || !self.unit_cost.is_finite() {
            return Err(CaseStudyError::Config(format!(
                "unit cost must be positive, got {}",
                self.unit_cost
            )));
        }
        for &a in self.user_avar_levels.iter().chain([&self.premium_user_level]) {
            if !(0.0..1.0).contains(&a) {
                return Err(CaseStudyError::Config(format!("AV@R level {a} outside [0, 1)")));
            }
        }
        if self.x_grid.is_empty() {
            return Err(CaseStudyError::Config("action grid is empty".into()));
        }
        if let Some(&x) = self.x_grid.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(CaseStudyError::Config(format!("action {x} outside [0, 1]")));
        }
        if let CoverageMode::FixedX { x } = self.coverage_mode {
            if !(0.0..=1.0).contains(&x) {
                return Err(CaseStudyError::Config(format!("fixed action {x} outside [0, 1]")));
            }
        }
        self.insurer
            .validate()
            .map_err(|e| CaseStudyError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn model(&self) -> Result<ParameterizedLossModel, CaseStudyError> {
        Ok(ParameterizedLossModel::binomial_ransomware(
            self.computers,
            self.damping,
        )?)
    }

    /// Problem with the user measured by AV@R at `level`.
    pub fn problem(&self, level: f64) -> Result<ProblemSpec, CaseStudyError> {
        Ok(ProblemSpec::new(
            self.insurer.clone(),
            RiskMeasureSpec::avar(level),
            self.model()?,
            self.unit_cost,
        )?
        .with_grid_points(self.baseline_grid_points)?
        .with_tolerances(self.tolerances)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageRow {
    pub level: f64,
    pub x: f64,
    /// Raw value of `1 + m / rho_u'`, NaN on flat risk; only a valid coverage when `feasible`.
    pub coverage: f64,
    pub feasible: bool,
    pub reason: Option<Infeasibility>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PremiumRow {
    pub x: f64,
    pub coverage: f64,
    /// NaN when the coverage was already infeasible.
    pub premium: f64,
    pub feasible: bool,
    pub reason: Option<Infeasibility>,
}

/// Maximal nondecreasing run, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub start_key: f64,
    pub end_key: f64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub tolerance: f64,
    pub rows: usize,
    pub segments: Vec<Segment>,
    /// Keys where a new segment starts.
    pub breakpoints: Vec<f64>,
    /// Drops between segments.
    pub violation_count: usize,
    /// Decreases found inside a reported segment; zero by construction.
    pub within_segment_violations: usize,
    /// Rows in the longest segment divided by all rows.
    pub longest_fraction: f64,
}

/// Splits `(key, value)` rows into maximal runs where each step satisfies
/// `next >= prev - tol`.
pub fn monotone_segments(rows: &[(f64, f64)], tol: f64) -> Result<SegmentReport, CaseStudyError> {
    if rows.len() < 2 {
        return Err(CaseStudyError::TooFewRows(rows.len()));
    }
    let mut segments = Vec::new();
    let mut start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || rows[i].1 < rows[i - 1].1 - tol {
            segments.push(Segment {
                start,
                end: i - 1,
                start_key: rows[start].0,
                end_key: rows[i - 1].0,
                rows: i - start,
            });
            start = i;
        }
    }
    let within_segment_violations = segments
        .iter()
        .map(|s| {
            rows[s.start..=s.end]
                .windows(2)
                .filter(|w| w[1].1 < w[0].1 - tol)
                .count()
        })
        .sum();
    let longest = segments.iter().map(|s| s.rows).max().unwrap_or(0);
    Ok(SegmentReport {
        tolerance: tol,
        rows: rows.len(),
        breakpoints: segments[1..].iter().map(|s| s.start_key).collect(),
        violation_count: segments.len() - 1,
        within_segment_violations,
        longest_fraction: longest as f64 / rows.len() as f64,
        segments,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSweep {
    pub mode: CoverageMode,
    pub rows: Vec<CoverageRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PremiumSweep {
    pub level: f64,
    pub x0: f64,
    #[serde(rename = "U_bar")]
    pub u_bar: f64,
    pub rows: Vec<PremiumRow>,
}

impl CoverageSweep {
    /// `(level, coverage)` over feasible rows.
    pub fn feasible_column(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.feasible)
            .map(|r| (r.level, r.coverage))
            .collect()
    }

    pub fn segments(&self) -> Result<SegmentReport, CaseStudyError> {
        monotone_segments(&self.feasible_column(), SEGMENT_TOLERANCE)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("a,x,c,feasible\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                format_sig(r.level),
                format_sig(r.x),
                format_sig(r.coverage),
                r.feasible
            );
        }
        out
    }
}

impl PremiumSweep {
    /// `(x, premium)` over feasible rows.
    pub fn feasible_column(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.feasible)
            .map(|r| (r.x, r.premium))
            .collect()
    }

    pub fn segments(&self) -> Result<SegmentReport, CaseStudyError> {
        monotone_segments(&self.feasible_column(), SEGMENT_TOLERANCE)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,c,q,feasible\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                format_sig(r.x),
                format_sig(r.coverage),
                format_sig(r.premium),
                r.feasible
            );
        }
        out
    }
}

/// `1 + m / d`, or NaN where the risk is flat.
fn raw_coverage(unit_cost: f64, derivative: f64) -> f64 {
    if derivative < 0.0 {
        1.0 + unit_cost / derivative
    } else {
        f64::NAN
    }
}

/// Coverage that keeps the user stationary, one row per AV@R level.
pub fn run_coverage_vs_avar_level(config: &CaseStudyConfig) -> Result<CoverageSweep, CaseStudyError> {
    config.validate()?;
    let mut rows = Vec::with_capacity(config.user_avar_levels.len());
    for &level in &config.user_avar_levels {
        let spec = config.problem(level)?;
        let x = match config.coverage_mode {
            CoverageMode::AtBaseline => solve_baseline(&spec)?.x0,
            CoverageMode::FixedX { x } => x,
        };
        let derivative = spec.user_derivative(x)?.value;
        let raw = raw_coverage(spec.unit_cost, derivative);
        let (feasible, reason) = match coverage_from_derivative(spec.unit_cost, derivative) {
            Ok(_) => (true, None),
            Err(reason) => (false, Some(reason)),
        };
        rows.push(CoverageRow {
            level,
            x,
            coverage: raw,
            feasible,
            reason,
        });
    }
    Ok(CoverageSweep {
        mode: config.coverage_mode,
        rows,
    })
}

/// Coverage and premium at each action for the fixed premium-sweep level,
/// with the reservation value taken from that level's baseline.
pub fn run_premium_vs_investment(config: &CaseStudyConfig) -> Result<PremiumSweep, CaseStudyError> {
    config.validate()?;
    let spec = config.problem(config.premium_user_level)?;
    let baseline = solve_baseline(&spec)?;
    let mut rows = Vec::with_capacity(config.x_grid.len());
    for &x in &config.x_grid {
        let derivative = spec.user_derivative(x)?.value;
        let coverage = raw_coverage(spec.unit_cost, derivative);
        let row = match coverage_from_derivative(spec.unit_cost, derivative) {
            Err(reason) => PremiumRow {
                x,
                coverage,
                premium: f64::NAN,
                feasible: false,
                reason: Some(reason),
            },
            Ok(c) => {
                let risk = spec.user_risk(x)?;
                let premium = baseline.u_bar - spec.unit_cost * x - (1.0 - c) * risk;
                let (feasible, reason) =
                    match premium_from_binding_ir(baseline.u_bar, spec.unit_cost, x, c, risk) {
                        Ok(_) => (true, None),
                        Err(reason) => (false, Some(reason)),
                    };
                PremiumRow {
                    x,
                    coverage: c,
                    premium,
                    feasible,
                    reason,
                }
            }
        };
        rows.push(row);
    }
    Ok(PremiumSweep {
        level: config.premium_user_level,
        x0: baseline.x0,
        u_bar: baseline.u_bar,
        rows,
    })
}

/// `%g`-style formatting with 9 significant digits.
pub fn format_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
