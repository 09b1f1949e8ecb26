mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riskcontract::casestudy::monotone_segments;
use riskcontract::contract::{
    compromise_objective, coverage_from_derivative, insurer_objective, insurer_objective_direct,
    kink_coverage_range, premium_from_binding_ir, stationarity_residual, user_objective,
    user_objective_direct, Contract, ProblemSpec,
};
use riskcontract::distributions::{check_fosd, ParameterizedLossModel};
use riskcontract::sensitivity::DerivativeEstimate;

use common::{random_measure, ransomware};

fn spec_from_seed(seed: u64, unit_cost: f64) -> ProblemSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let insurer = random_measure(3, &mut rng);
    let user = random_measure(3, &mut rng);
    ProblemSpec::new(insurer, user, ransomware(), unit_cost).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn coverage_strictly_decreasing_in_slope(m in 0.01f64..10.0, d1 in -100.0f64..-0.01, t in 0.01f64..1.0) {
        let d2 = d1 * (1.0 - t);
        if let (Ok(c1), Ok(c2)) = (coverage_from_derivative(m, d1), coverage_from_derivative(m, d2)) {
            prop_assert!(c1 > c2);
            prop_assert!((0.0..1.0).contains(&c2) && c1 < 1.0);
        }
    }

    #[test]
    fn coverage_rejects_flat_and_weak_slopes(m in 0.01f64..10.0, d in -10.0f64..10.0) {
        let res = coverage_from_derivative(m, d);
        prop_assert_eq!(res.is_ok(), d < 0.0 && d <= -m);
    }

    #[test]
    fn objectives_match_transformed_losses(
        seed in any::<u64>(), x in 0.0f64..=1.0, c in 0.0f64..=1.0, q in 0.0f64..5.0, m in 0.1f64..5.0,
    ) {
        let spec = spec_from_seed(seed, m);
        let contract = Contract::new(c, q).unwrap();
        let u = user_objective(&spec, &contract, x).unwrap();
        let u_direct = user_objective_direct(&spec, &contract, x).unwrap();
        prop_assert!((u - u_direct).abs() <= 1e-9 * u.abs().max(1.0));
        let i = insurer_objective(&spec, &contract, x).unwrap();
        let i_direct = insurer_objective_direct(&spec, &contract, x).unwrap();
        prop_assert!((i - i_direct).abs() <= 1e-9 * i.abs().max(1.0));
    }

    #[test]
    fn compromise_is_linear_in_coverage(seed in any::<u64>(), x in 0.0f64..=1.0, c in 0.0f64..=1.0) {
        let spec = spec_from_seed(seed, 2.0);
        let blended = compromise_objective(&spec, c, x).unwrap();
        let by_hand = c * spec.insurer_risk(x).unwrap() + (1.0 - c) * spec.user_risk(x).unwrap() + 2.0 * x;
        prop_assert!((blended - by_hand).abs() <= 1e-12 * by_hand.abs().max(1.0));
    }

    #[test]
    fn binding_premium_makes_participation_bind(
        seed in any::<u64>(), x in 0.0f64..=1.0, c in 0.0f64..=1.0, u_bar in 0.0f64..20.0,
    ) {
        let spec = spec_from_seed(seed, 2.0);
        let rho = spec.user_risk(x).unwrap();
        if let Ok(q) = premium_from_binding_ir(u_bar, 2.0, x, c, rho) {
            let contract = Contract::new(c, q).unwrap();
            let u = user_objective(&spec, &contract, x).unwrap();
            prop_assert!((u - u_bar).abs() <= 1e-9 * u_bar.max(1.0));
        }
    }

    #[test]
    fn kink_range_is_exactly_stationary(
        m in 0.01f64..5.0, left in -20.0f64..0.0, gap in 0.0f64..20.0, c in 0.0f64..=1.0,
    ) {
        let right = left + gap;
        let estimate = DerivativeEstimate { value: 0.5 * (left + right), left: Some(left), right: Some(right), kink: true };
        match kink_coverage_range(m, left, right) {
            Ok((lo, hi)) => {
                prop_assert!(0.0 <= lo && lo <= hi && hi < 1.0);
                let r = stationarity_residual(m, c, &estimate);
                let scale = 1e-12 * (left.abs() + right.abs() + m);
                if c >= lo && c <= hi {
                    prop_assert!(r <= scale);
                } else if c < lo - 1e-9 || c > hi + 1e-9 {
                    prop_assert!(r > 0.0);
                }
            }
            Err(_) => prop_assert!(left > -m),
        }
    }

    #[test]
    fn segments_partition_rows(values in prop::collection::vec(-5.0f64..5.0, 2..60), tol in 0.0f64..0.5) {
        let rows: Vec<(f64, f64)> = values.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect();
        let report = monotone_segments(&rows, tol).unwrap();
        prop_assert_eq!(report.within_segment_violations, 0);
        prop_assert_eq!(report.segments.first().unwrap().start, 0);
        prop_assert_eq!(report.segments.last().unwrap().end, rows.len() - 1);
        for w in report.segments.windows(2) {
            prop_assert_eq!(w[0].end + 1, w[1].start);
            // every boundary is a genuine drop
            prop_assert!(rows[w[1].start].1 < rows[w[0].end].1 - tol);
        }
        let total: usize = report.segments.iter().map(|s| s.rows).sum();
        prop_assert_eq!(total, rows.len());
        prop_assert_eq!(report.violation_count, report.segments.len() - 1);
    }

    #[test]
    fn ransomware_losses_shrink_with_investment(
        n in 1u32..30, kappa in 0.0f64..=1.0, x1 in 0.0f64..=1.0, x2 in 0.0f64..=1.0,
    ) {
        let model = ParameterizedLossModel::binomial_ransomware(n, kappa).unwrap();
        let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        prop_assert!(check_fosd(&model, lo, hi, 1e-12).unwrap().holds);
        let d = model.distribution_at(hi).unwrap();
        prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}
