//! Cyber-insurance contract design when the insurer and the user perceive risk
//! through different coherent risk measures.
//!
//! - [`distributions`]: discrete loss distributions and loss models
//!   parameterized by the user's protection investment.
//! - [`risk`]: expectation, average value-at-risk, absolute semideviation and
//!   their mixtures, with axiom and dominance checks.
//! - [`sensitivity`]: derivatives of a risk measure with respect to the action.
//! - [`contract`]: baseline, coverage, premium, the reduced insurer problem and
//!   an exhaustive bilevel oracle.
//! - [`casestudy`]: the ransomware sweeps.
//! - [`cli`]: the `riskcontract` command line.

pub mod casestudy;
pub mod cli;
pub mod contract;
pub mod distributions;
pub mod risk;
pub mod search;
pub mod sensitivity;

pub use contract::{
    brute_force_bilevel, solve_baseline, solve_contract, BaselineResult, Contract, ContractError,
    Infeasibility, ProblemSpec, SolveReport, Tolerances,
};
pub use distributions::{DiscreteDistribution, LossFamily, ParameterizedLossModel, TabulatedFamily};
pub use risk::RiskMeasureSpec;
