//! `riskcontract` command line.
//!
//! Every command reads one JSON scenario with the sections `model`, `insurer`,
//! `user`, `costs`, `grids`, `tolerances` and `output`; unknown keys are
//! rejected. Exit codes: 0 success, 1 config error, 2 no feasible contract,
//! 3 diagnostic failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::casestudy::{
    run_coverage_vs_avar_level, run_premium_vs_investment, CaseStudyConfig, CaseStudyError,
    CoverageMode, SegmentReport,
};
use crate::contract::{
    solve_contract, ContractError, Infeasibility, ProblemSpec, SolveReport, Tolerances,
};
use crate::distributions::{
    check_density_convexity, check_fosd, linspace, ConvexityReport, DistributionError,
    ParameterizedLossModel, TabulatedFamily, DEFAULT_DAMPING,
};
use crate::risk::{
    check_axioms, check_dominance_consistency, AxiomReport, AxiomSampler,
    DominanceConsistencyReport, RiskMeasureSpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NO_CONTRACT: i32 = 2;
pub const EXIT_DIAGNOSTIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "riskcontract", version, about = "Cyber-insurance contract design under coherent risk measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory; must exist. Overrides `output.dir` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized checks; echoed into every report.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal contract and write `solve_report.json`.
    Solve { config: PathBuf },
    /// Run a case-study sweep and write a CSV table plus JSON sidecar.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        config: PathBuf,
    },
    /// Run axiom, dominance and convexity diagnostics and write `check_report.json`.
    Check { config: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Coverage,
    Premium,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("no feasible contract")]
    NoContract(Vec<(f64, Infeasibility)>),
    #[error("diagnostics failed: {}", .0.join("; "))]
    Diagnostic(Vec<String>),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::NoContract(_) => EXIT_NO_CONTRACT,
            CliError::Diagnostic(_) => EXIT_DIAGNOSTIC,
        }
    }
}

impl From<ContractError> for CliError {
    fn from(e: ContractError) -> Self {
        match e {
            ContractError::NoContract { reasons } => CliError::NoContract(reasons),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<CaseStudyError> for CliError {
    fn from(e: CaseStudyError) -> Self {
        match e {
            CaseStudyError::Contract(c) => c.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<DistributionError> for CliError {
    fn from(e: DistributionError) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    pub insurer: RiskMeasureSpec,
    pub user: RiskMeasureSpec,
    pub costs: CostConfig,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Always on the action set `[0, 1]`.
    BinomialRansomware {
        computers: u32,
        #[serde(default = "default_damping")]
        damping: f64,
    },
    /// Either inline `support`/`actions`/`rows` or a `csv` path relative to
    /// the config file. The action set defaults to the table's action range.
    Tabulated {
        #[serde(default)]
        csv: Option<PathBuf>,
        #[serde(default)]
        support: Option<Vec<f64>>,
        #[serde(default)]
        actions: Option<Vec<f64>>,
        #[serde(default)]
        rows: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        action_low: Option<f64>,
        #[serde(default)]
        action_high: Option<f64>,
    },
}

fn default_damping() -> f64 {
    DEFAULT_DAMPING
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub unit_cost: f64,
}

/// Either an explicit list or an evenly spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range(RangeSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Range(r) => linspace(r.low, r.high, r.count),
        }
    }

    fn range(low: f64, high: f64, count: usize) -> Self {
        GridSpec::Range(RangeSpec { low, high, count })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Action grid of the contract solver.
    pub solver_points: usize,
    /// Action grid for dominance, convexity and sufficient-condition diagnostics.
    pub diagnostic_points: usize,
    /// Random loss pairs per measure in the axiom check.
    pub axiom_trials: usize,
    /// User AV@R levels for the coverage sweep.
    pub avar_levels: GridSpec,
    /// Actions for the premium sweep.
    pub x_grid: GridSpec,
    pub coverage_mode: CoverageMode,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            solver_points: 1001,
            diagnostic_points: 41,
            axiom_trials: 1000,
            avar_levels: GridSpec::range(0.0, 0.95, 41),
            x_grid: GridSpec::range(0.0, 1.0, 41),
            coverage_mode: CoverageMode::AtBaseline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub equality: f64,
    pub derivative: f64,
    pub diagnostic: f64,
    pub search: f64,
    pub step: Option<f64>,
    /// Step for the pmf-convexity check; defaults to ten solver steps.
    pub convexity_step: Option<f64>,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        Self {
            equality: t.equality,
            derivative: t.derivative,
            diagnostic: t.diagnostic,
            search: t.search,
            step: t.step,
            convexity_step: None,
        }
    }
}

impl ToleranceConfig {
    fn solver(&self) -> Tolerances {
        Tolerances {
            equality: self.equality,
            derivative: self.derivative,
            diagnostic: self.diagnostic,
            search: self.search,
            step: self.step,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Relative paths resolve against the config file's directory. Without
    /// this or `--out`, files go to the working directory.
    pub dir: Option<PathBuf>,
}

/// Parses a scenario; errors carry `path:line:column`.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

impl ScenarioConfig {
    pub fn build_model(&self, base: &Path) -> Result<ParameterizedLossModel, CliError> {
        match &self.model {
            ModelConfig::BinomialRansomware { computers, damping } => {
                if !(*damping > 0.0 && *damping <= 1.0) {
                    return Err(CliError::Config(format!(
                        "model.damping must lie in (0, 1], got {damping}"
                    )));
                }
                Ok(ParameterizedLossModel::binomial_ransomware(*computers, *damping)?)
            }
            ModelConfig::Tabulated {
                csv,
                support,
                actions,
                rows,
                action_low,
                action_high,
            } => {
                let table = match (csv, support, actions, rows) {
                    (Some(file), None, None, None) => {
                        TabulatedFamily::from_csv_path(&base.join(file))?
                    }
                    (None, Some(s), Some(a), Some(r)) => {
                        TabulatedFamily::new(s.clone(), a.clone(), r.clone())?
                    }
                    _ => {
                        return Err(CliError::Config(
                            "tabulated model needs either `csv` or all of `support`, `actions`, `rows`"
                                .into(),
                        ))
                    }
                };
                let low = action_low.unwrap_or(table.actions()[0]);
                let high = action_high.unwrap_or(*table.actions().last().expect("nonempty"));
                Ok(ParameterizedLossModel::tabulated(low, high, table)?)
            }
        }
    }

    pub fn problem(&self, base: &Path) -> Result<ProblemSpec, CliError> {
        self.insurer
            .validate()
            .map_err(|e| CliError::Config(format!("insurer: {e}")))?;
        self.user
            .validate()
            .map_err(|e| CliError::Config(format!("user: {e}")))?;
        let spec = ProblemSpec::new(
            self.insurer.clone(),
            self.user.clone(),
            self.build_model(base)?,
            self.costs.unit_cost,
        )?
        .with_grid_points(self.grids.solver_points)?
        .with_tolerances(self.tolerances.solver())?;
        Ok(spec)
    }

    /// Sweeps need the ransomware model and an AV@R user.
    pub fn case_study(&self) -> Result<CaseStudyConfig, CliError> {
        let ModelConfig::BinomialRansomware { computers, damping } = &self.model else {
            return Err(CliError::Config(
                "sweeps require the binomial_ransomware model".into(),
            ));
        };
        let RiskMeasureSpec::Avar { level } = self.user else {
            return Err(CliError::Config(
                "sweeps require an avar user measure; its level drives the premium sweep".into(),
            ));
        };
        let config = CaseStudyConfig {
            computers: *computers,
            damping: *damping,
            unit_cost: self.costs.unit_cost,
            user_avar_levels: self.grids.avar_levels.points(),
            premium_user_level: level,
            insurer: self.insurer.clone(),
            x_grid: self.grids.x_grid.points(),
            coverage_mode: self.grids.coverage_mode,
            baseline_grid_points: self.grids.solver_points,
            tolerances: self.tolerances.solver(),
        };
        config.validate()?;
        if config.baseline_grid_points < 3 {
            return Err(CliError::Config("grids.solver_points must be at least 3".into()));
        }
        Ok(config)
    }
}

/// Options shared by all commands.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub verbose: bool,
}

fn output_dir(config: &ScenarioConfig, config_path: &Path, opts: &RunOptions) -> Result<PathBuf, CliError> {
    let dir = match (&opts.out, &config.output.dir) {
        (Some(out), _) => out.clone(),
        (None, Some(dir)) => config_dir(config_path).join(dir),
        (None, None) => PathBuf::from("."),
    };
    if !dir.is_dir() {
        return Err(CliError::Config(format!(
            "output directory {} does not exist",
            dir.display()
        )));
    }
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Settings echoed into every output file.
#[derive(Debug, Clone, Serialize)]
struct RunEcho<'a> {
    seed: u64,
    tolerances: &'a ToleranceConfig,
    config: &'a ScenarioConfig,
}

#[derive(Debug, Serialize)]
struct SolveOutput<'a> {
    #[serde(flatten)]
    report: &'a SolveReport,
    run: RunEcho<'a>,
}

/// `riskcontract solve`.
pub fn cmd_solve(config_path: &Path, opts: &RunOptions) -> Result<PathBuf, CliError> {
    let config = load_config(config_path)?;
    let spec = config.problem(&config_dir(config_path))?;
    let dir = output_dir(&config, config_path, opts)?;
    if opts.verbose {
        eprintln!(
            "solving: insurer {}, user {}, m = {}, {} grid points",
            spec.insurer.label(),
            spec.user.label(),
            spec.unit_cost,
            spec.grid_points
        );
    }
    let report = solve_contract(&spec)?;
    if opts.verbose {
        eprintln!(
            "x0 = {}, x* = {}, c* = {}, q* = {}",
            report.x0, report.x_star, report.c_star, report.q_star
        );
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    let path = dir.join("solve_report.json");
    write_json(
        &path,
        &SolveOutput {
            report: &report,
            run: RunEcho {
                seed: opts.seed,
                tolerances: &config.tolerances,
                config: &config,
            },
        },
    )?;
    Ok(path)
}

#[derive(Debug, Serialize)]
struct SweepSidecar<'a, T: Serialize> {
    kind: SweepKind,
    case_study: &'a CaseStudyConfig,
    sweep: &'a T,
    segments: Option<SegmentReport>,
    segment_error: Option<String>,
    run: RunEcho<'a>,
}

/// `riskcontract sweep`; returns the CSV and sidecar paths.
pub fn cmd_sweep(
    config_path: &Path,
    kind: SweepKind,
    opts: &RunOptions,
) -> Result<(PathBuf, PathBuf), CliError> {
    let config = load_config(config_path)?;
    let case = config.case_study()?;
    let dir = output_dir(&config, config_path, opts)?;
    let echo = RunEcho {
        seed: opts.seed,
        tolerances: &config.tolerances,
        config: &config,
    };
    let (stem, csv, sidecar) = match kind {
        SweepKind::Coverage => {
            let sweep = run_coverage_vs_avar_level(&case)?;
            let (segments, segment_error) = split(sweep.segments());
            let sidecar = serde_json::to_value(SweepSidecar {
                kind,
                case_study: &case,
                sweep: &sweep,
                segments,
                segment_error,
                run: echo,
            });
            ("coverage_sweep", sweep.to_csv(), sidecar)
        }
        SweepKind::Premium => {
            let sweep = run_premium_vs_investment(&case)?;
            let (segments, segment_error) = split(sweep.segments());
            let sidecar = serde_json::to_value(SweepSidecar {
                kind,
                case_study: &case,
                sweep: &sweep,
                segments,
                segment_error,
                run: echo,
            });
            ("premium_sweep", sweep.to_csv(), sidecar)
        }
    };
    let sidecar = sidecar.map_err(|e| CliError::Io(format!("serializing sweep: {e}")))?;
    if opts.verbose {
        if let Some(report) = sidecar.get("segments").filter(|s| !s.is_null()) {
            eprintln!(
                "{} segments, breakpoints {}",
                report["segments"].as_array().map_or(0, Vec::len),
                report["breakpoints"]
            );
        }
    }
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    write_text(&csv_path, &csv)?;
    write_json(&json_path, &sidecar)?;
    Ok((csv_path, json_path))
}

fn split(r: Result<SegmentReport, CaseStudyError>) -> (Option<SegmentReport>, Option<String>) {
    match r {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

/// Dominance shift along consecutive pairs of the diagnostic grid.
#[derive(Debug, Clone, Serialize)]
pub struct FosdSummary {
    pub holds: bool,
    pub worst_gap: f64,
    /// Pairs `(x1, x2)` where the dominance shift fails.
    pub failures: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub axioms: Vec<AxiomReport>,
    pub fosd: FosdSummary,
    pub dominance_consistency: Vec<DominanceConsistencyReport>,
    /// Informational; a failing convexity check is only a warning.
    pub density_convexity: ConvexityReport,
    pub warnings: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
struct CheckOutput<'a> {
    #[serde(flatten)]
    report: &'a CheckReport,
    run: RunEcho<'a>,
}

/// Runs every diagnostic; errors only on invalid input.
pub fn run_checks(spec: &ProblemSpec, grid_points: usize, trials: usize, convexity_step: Option<f64>, seed: u64) -> Result<CheckReport, CliError> {
    let tol = spec.tolerances.diagnostic;
    let grid = linspace(spec.model.action_low(), spec.model.action_high(), grid_points.max(3));
    let sampler = AxiomSampler::default();
    let axioms = vec![
        check_axioms(&spec.insurer, &sampler, trials, tol, seed),
        check_axioms(&spec.user, &sampler, trials, tol, seed.wrapping_add(1)),
    ];
    let mut failures = Vec::new();
    let mut worst_gap = 0.0_f64;
    for pair in grid.windows(2) {
        let r = check_fosd(&spec.model, pair[0], pair[1], tol)?;
        worst_gap = worst_gap.max(r.worst_gap);
        if !r.holds {
            failures.push((pair[0], pair[1]));
        }
    }
    let fosd = FosdSummary {
        holds: failures.is_empty(),
        worst_gap,
        failures,
    };
    let dominance_consistency = [&spec.insurer, &spec.user]
        .into_iter()
        .map(|m| check_dominance_consistency(m, &spec.model, &grid, tol))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let h = convexity_step.unwrap_or(10.0 * spec.step());
    let density_convexity = check_density_convexity(&spec.model, &grid, h, tol)?;

    let mut warnings = Vec::new();
    if !density_convexity.holds {
        warnings.push(format!(
            "loss pmf is not convex in the action (worst second difference {:e})",
            density_convexity.worst_difference
        ));
    }
    let passed = axioms.iter().all(|a| a.passed)
        && fosd.holds
        && dominance_consistency.iter().all(|d| d.holds);
    Ok(CheckReport {
        axioms,
        fosd,
        dominance_consistency,
        density_convexity,
        warnings,
        passed,
    })
}

fn failed_checks(report: &CheckReport) -> Vec<String> {
    let mut failed = Vec::new();
    for a in &report.axioms {
        for (name, outcome) in &a.axioms {
            if !outcome.passed {
                failed.push(format!(
                    "{} violates {name} by {:e}",
                    a.measure.label(),
                    outcome.max_violation
                ));
            }
        }
    }
    if !report.fosd.holds {
        failed.push(format!(
            "loss shift is not dominance-ordered on {} grid pairs",
            report.fosd.failures.len()
        ));
    }
    for d in &report.dominance_consistency {
        if !d.holds {
            failed.push(format!(
                "{} increases with investment on {} grid pairs",
                d.measure.label(),
                d.violations.len()
            ));
        }
    }
    failed
}

/// `riskcontract check`; the report is written even when diagnostics fail.
pub fn cmd_check(config_path: &Path, opts: &RunOptions) -> Result<PathBuf, CliError> {
    let config = load_config(config_path)?;
    let spec = config.problem(&config_dir(config_path))?;
    let dir = output_dir(&config, config_path, opts)?;
    let report = run_checks(
        &spec,
        config.grids.diagnostic_points,
        config.grids.axiom_trials,
        config.tolerances.convexity_step,
        opts.seed,
    )?;
    let path = dir.join("check_report.json");
    write_json(
        &path,
        &CheckOutput {
            report: &report,
            run: RunEcho {
                seed: opts.seed,
                tolerances: &config.tolerances,
                config: &config,
            },
        },
    )?;
    if opts.verbose {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    let failed = failed_checks(&report);
    if failed.is_empty() {
        Ok(path)
    } else {
        Err(CliError::Diagnostic(failed))
    }
}

/// Groups consecutive infeasible actions with the same reason kind.
fn summarize_reasons(reasons: &[(f64, Infeasibility)]) -> Vec<String> {
    let kind = |r: &Infeasibility| match r {
        Infeasibility::FlatRisk { .. } => "risk not decreasing",
        Infeasibility::UnderSensitive { .. } => "under-sensitive risk (coverage < 0)",
        Infeasibility::NonPositivePremium { .. } => "non-positive premium",
        Infeasibility::ConcaveKink { .. } => "concave kink in the user's risk",
    };
    let mut lines = Vec::new();
    let mut i = 0;
    while i < reasons.len() {
        let k = kind(&reasons[i].1);
        let mut j = i;
        while j + 1 < reasons.len() && kind(&reasons[j + 1].1) == k {
            j += 1;
        }
        let count = j - i + 1;
        lines.push(format!(
            "x in [{}, {}]: {k} ({count} point{})",
            reasons[i].0,
            reasons[j].0,
            if count == 1 { "" } else { "s" }
        ));
        i = j + 1;
    }
    lines
}

fn report_error(e: &CliError, verbose: bool) {
    match e {
        CliError::NoContract(reasons) => {
            eprintln!("error: no feasible contract on the action grid");
            if verbose {
                for (x, r) in reasons {
                    eprintln!("  x = {x}: {r}");
                }
            } else {
                for line in summarize_reasons(reasons) {
                    eprintln!("  {line}");
                }
            }
        }
        CliError::Diagnostic(failed) => {
            eprintln!("error: diagnostics failed");
            for f in failed {
                eprintln!("  {f}");
            }
        }
        other => eprintln!("error: {other}"),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let opts = RunOptions {
        out: cli.out,
        seed: cli.seed,
        verbose: cli.verbose,
    };
    let result = match &cli.command {
        Command::Solve { config } => cmd_solve(config, &opts).map(|p| vec![p]),
        Command::Sweep { kind, config } => {
            cmd_sweep(config, *kind, &opts).map(|(a, b)| vec![a, b])
        }
        Command::Check { config } => cmd_check(config, &opts).map(|p| vec![p]),
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            report_error(&e, opts.verbose);
            e.exit_code()
        }
    }
}
