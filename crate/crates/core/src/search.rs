//! Scalar minimization on a compact interval: a uniform grid scan followed by
//! golden-section refinement of the best bracket.

/// `(sqrt(5) - 1) / 2`
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[a, b]`. Returns the best
/// point evaluated, including the endpoints.
pub fn golden_section<F>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let mut best = (lo, f(lo));
    let f_hi = f(hi);
    if f_hi < best.1 {
        best = (hi, f_hi);
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        for (x, fx) in [(x1, f1), (x2, f2)] {
            if fx < best.1 {
                best = (x, fx);
            }
        }
    }
    best
}

/// Index of the smallest value; ties go to the first (smallest action).
pub fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(b) if values[b] <= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Scans `grid` (ascending), then refines with golden-section on the cells
/// adjacent to the best grid point. Non-finite values mark infeasible points.
/// The refined point only replaces the grid point when it is strictly better.
pub fn grid_then_golden<F>(mut f: F, grid: &[f64], tol: f64) -> Option<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let finite: Vec<f64> = values
        .iter()
        .map(|&v| if v.is_finite() { v } else { f64::NAN })
        .collect();
    let k = argmin(&finite)?;
    let mut best = (grid[k], values[k]);
    let lo = grid[k.saturating_sub(1)];
    let hi = grid[(k + 1).min(grid.len() - 1)];
    if hi > lo {
        let (x, fx) = golden_section(
            |x| {
                let v = f(x);
                if v.is_finite() {
                    v
                } else {
                    f64::INFINITY
                }
            },
            lo,
            hi,
            tol,
            200,
        );
        if fx < best.1 {
            best = (x, fx);
        }
    }
    Some(best)
}
