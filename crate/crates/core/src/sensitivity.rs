//! Derivatives of `x -> rho[xi | x]` with respect to the protection investment.

use serde::Serialize;
use thiserror::Error;

use crate::distributions::{DistributionError, ParameterizedLossModel};
use crate::risk::{dual_evaluate_avar, RiskError, RiskMeasureSpec};

/// Tolerance behind the kink flag; one-sided slopes must disagree by more
/// than ten times this before a point is called a kink.
pub const KINK_TOLERANCE: f64 = 1e-9;

/// Relative step used when the caller does not pick one.
pub const DEFAULT_RELATIVE_STEP: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error("finite-difference step must be positive, got {0}")]
    Step(f64),
    #[error("step {step} does not fit in the action set of width {width}")]
    StepTooLarge { step: f64, width: f64 },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Risk(#[from] RiskError),
}

/// `1e-4` of the action-set width.
pub fn default_step(model: &ParameterizedLossModel) -> f64 {
    DEFAULT_RELATIVE_STEP * model.action_width()
}

/// First-derivative estimate together with its one-sided slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeEstimate {
    pub value: f64,
    /// `(f(x) - f(x - h)) / h`, absent at the lower boundary.
    pub left: Option<f64>,
    /// `(f(x + h) - f(x)) / h`, absent at the upper boundary.
    pub right: Option<f64>,
    /// Set when the one-sided slopes jump, i.e. the risk has a kink at `x`.
    pub kink: bool,
}

enum Stencil {
    Central,
    Forward,
    Backward,
}

fn stencil(model: &ParameterizedLossModel, x: f64, h: f64) -> Result<Stencil, SensitivityError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(SensitivityError::Step(h));
    }
    let width = model.action_width();
    if 3.0 * h > width {
        return Err(SensitivityError::StepTooLarge { step: h, width });
    }
    if !model.contains(x) {
        return Err(DistributionError::ActionOutOfRange {
            x,
            low: model.action_low(),
            high: model.action_high(),
        }
        .into());
    }
    Ok(if x - h < model.action_low() {
        Stencil::Forward
    } else if x + h > model.action_high() {
        Stencil::Backward
    } else {
        Stencil::Central
    })
}

fn risk_at(
    spec: &RiskMeasureSpec,
    model: &ParameterizedLossModel,
    x: f64,
) -> Result<f64, SensitivityError> {
    Ok(spec.evaluate(&model.distribution_at(x)?))
}

/// Central difference `(rho(x+h) - rho(x-h)) / 2h`; second-order one-sided
/// stencils at the boundary of the action set.
pub fn risk_derivative_fd(
    spec: &RiskMeasureSpec,
    model: &ParameterizedLossModel,
    x: f64,
    h: f64,
) -> Result<DerivativeEstimate, SensitivityError> {
    let f = |t: f64| risk_at(spec, model, t);
    match stencil(model, x, h)? {
        Stencil::Forward => {
            let (f0, f1, f2) = (f(x)?, f(x + h)?, f(x + 2.0 * h)?);
            Ok(DerivativeEstimate {
                value: (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h),
                left: None,
                right: Some((f1 - f0) / h),
                kink: false,
            })
        }
        Stencil::Backward => {
            let (f0, f1, f2) = (f(x)?, f(x - h)?, f(x - 2.0 * h)?);
            Ok(DerivativeEstimate {
                value: (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h),
                left: Some((f0 - f1) / h),
                right: None,
                kink: false,
            })
        }
        Stencil::Central => {
            let (fm, f0, fp) = (f(x - h)?, f(x)?, f(x + h)?);
            let left = (f0 - fm) / h;
            let right = (fp - f0) / h;
            // On smooth stretches the slope gap shrinks linearly with the
            // step, so the Richardson combination of the gaps at h and h/2
            // isolates a genuine jump in the derivative.
            let half = h / 2.0;
            let gap_half = (f(x + half)? - 2.0 * f0 + f(x - half)?) / half;
            let jump = 2.0 * gap_half - (right - left);
            let rounding = 1e3 * f64::EPSILON * f0.abs().max(1.0) / h;
            Ok(DerivativeEstimate {
                value: (fp - fm) / (2.0 * h),
                left: Some(left),
                right: Some(right),
                kink: jump.abs() > 10.0 * KINK_TOLERANCE + rounding,
            })
        }
    }
}

/// Second central difference `(rho(x+h) - 2 rho(x) + rho(x-h)) / h^2`, with
/// a second-order one-sided stencil at the boundary.
pub fn risk_second_derivative_fd(
    spec: &RiskMeasureSpec,
    model: &ParameterizedLossModel,
    x: f64,
    h: f64,
) -> Result<f64, SensitivityError> {
    let f = |t: f64| risk_at(spec, model, t);
    let h2 = h * h;
    Ok(match stencil(model, x, h)? {
        Stencil::Central => (f(x + h)? - 2.0 * f(x)? + f(x - h)?) / h2,
        Stencil::Forward => {
            (2.0 * f(x)? - 5.0 * f(x + h)? + 4.0 * f(x + 2.0 * h)? - f(x + 3.0 * h)?) / h2
        }
        Stencil::Backward => {
            (2.0 * f(x)? - 5.0 * f(x - h)? + 4.0 * f(x - 2.0 * h)? - f(x - 3.0 * h)?) / h2
        }
    })
}

/// AV@R derivative through a fixed dual optimizer.
///
/// With `zeta*` the worst-case density at `x` and `v` its value-at-risk, the
/// derivative is `sum_i zeta*_i (z_i - v) dp_i/dx`. The `v` term is the
/// multiplier of the constraint `E[zeta] = 1`, which moves with `x` because
/// the reference measure itself depends on the action. The pmf derivative
/// uses the same stencils as [`risk_derivative_fd`] with step `h`.
pub fn risk_derivative_dual(
    model: &ParameterizedLossModel,
    x: f64,
    level: f64,
    h: f64,
) -> Result<f64, SensitivityError> {
    let pmf = |t: f64| -> Result<Vec<f64>, SensitivityError> {
        Ok(model.distribution_at(t)?.probs().to_vec())
    };
    let slope: Vec<f64> = match stencil(model, x, h)? {
        Stencil::Central => {
            let (lo, hi) = (pmf(x - h)?, pmf(x + h)?);
            lo.iter().zip(&hi).map(|(a, b)| (b - a) / (2.0 * h)).collect()
        }
        Stencil::Forward => {
            let (p0, p1, p2) = (pmf(x)?, pmf(x + h)?, pmf(x + 2.0 * h)?);
            (0..p0.len())
                .map(|i| (-3.0 * p0[i] + 4.0 * p1[i] - p2[i]) / (2.0 * h))
                .collect()
        }
        Stencil::Backward => {
            let (p0, p1, p2) = (pmf(x)?, pmf(x - h)?, pmf(x - 2.0 * h)?);
            (0..p0.len())
                .map(|i| (3.0 * p0[i] - 4.0 * p1[i] + p2[i]) / (2.0 * h))
                .collect()
        }
    };
    let dist = model.distribution_at(x)?;
    let dual = dual_evaluate_avar(&dist, level)?;
    Ok(dist
        .support()
        .iter()
        .zip(&dual.density.weights)
        .zip(&slope)
        .map(|((z, w), dp)| w * (z - dual.quantile) * dp)
        .sum())
}
