use dreval::datagen::{synthetic_multiclass, synthetic_regression, MulticlassSpec, RegressionSpec};
use dreval::harness::{
    run_covariate_shift, run_eval_stationary, run_replicates, sign_test_p, split_indices,
    EvalConfig, ReplicateSummary, ShiftConfig,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn rmse_decomposes_into_bias_and_spread(
        truth in -2.0f64..2.0,
        estimates in prop::collection::vec(-3.0f64..3.0, 2..40),
    ) {
        let s = ReplicateSummary::new("m", truth, &estimates, 0);
        let r = estimates.len() as f64;
        let rhs = s.bias * s.bias + s.std * s.std * (r - 1.0) / r;
        prop_assert!((s.rmse * s.rmse - rhs).abs() < 1e-10 * (1.0 + rhs));
        prop_assert!(s.rmse_ci95 >= 0.0);
    }

    #[test]
    fn split_partitions_every_index(n in 0usize..200, a in 0.0f64..0.5, b in 0.0f64..0.5, seed in any::<u64>()) {
        let parts = split_indices(n, &[a, b], seed);
        prop_assert_eq!(parts.len(), 3);
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn empty_summary_is_nan() {
    let s = ReplicateSummary::new("m", 0.5, &[], 3);
    assert!(s.rmse.is_nan() && s.bias.is_nan());
    assert_eq!((s.replicates, s.failures), (0, 3));
}

#[test]
fn sign_test_matches_binomial_tail() {
    fn choose(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }
    for (wins, losses) in [(0, 0), (5, 0), (21, 9), (15, 15), (3, 12)] {
        let n = (wins + losses) as u64;
        let oracle: f64 =
            (wins as u64..=n).map(|k| choose(n, k)).sum::<f64>() / 2f64.powi(n as i32);
        assert!(
            (sign_test_p(wins, losses) - oracle).abs() < 1e-12,
            "{wins}/{losses}"
        );
    }
}

#[test]
fn replicate_results_do_not_depend_on_worker_count() {
    let f = |r: usize| Ok((r as f64).sqrt());
    assert_eq!(
        run_replicates(37, 1, f).unwrap(),
        run_replicates(37, 3, f).unwrap()
    );

    let data = synthetic_multiclass(
        &MulticlassSpec {
            n: 400,
            ..Default::default()
        },
        2,
    )
    .unwrap();
    let config = EvalConfig::default();
    let one = run_eval_stationary(&data, &config, 6, 9, 1).unwrap();
    let many = run_eval_stationary(&data, &config, 6, 9, 3).unwrap();
    assert_eq!(one, many);
    assert_ne!(one, run_eval_stationary(&data, &config, 6, 10, 1).unwrap());
}

#[test]
fn stationary_eval_reports_one_row_per_method_and_replicate() {
    let data = synthetic_multiclass(
        &MulticlassSpec {
            n: 400,
            ..Default::default()
        },
        4,
    )
    .unwrap();
    let config = EvalConfig::default();
    let out = run_eval_stationary(&data, &config, 5, 1, 1).unwrap();
    assert_eq!(out.rows.len(), 5 * config.methods.len());
    assert_eq!(out.summaries.len(), config.methods.len());
    assert!((0.0..=1.0).contains(&out.ground_truth));
    for s in &out.summaries {
        assert_eq!(s.replicates + s.failures, 5);
        assert_eq!(s.ground_truth, out.ground_truth);
    }
    assert!(run_eval_stationary(&data, &config, 0, 1, 1).is_err());
}

#[test]
fn covariate_shift_summaries_follow_the_fraction_grid() {
    let data = synthetic_regression(
        &RegressionSpec {
            n: 5000,
            ..Default::default()
        },
        3,
    )
    .unwrap();
    let config = ShiftConfig {
        fractions: vec![0.05, 0.2],
        ..Default::default()
    };
    let out = run_covariate_shift(&data, &config, 8, 5, 1).unwrap();
    assert_eq!(out.summaries.len(), 2);
    assert_eq!(out.rows.len(), 16);
    let mean_response = data
        .examples
        .iter()
        .map(|(_, y)| out.sampler.rescaled(*y))
        .sum::<f64>()
        / data.examples.len() as f64;
    assert!((out.ground_truth - mean_response).abs() < 1e-9);
    for fractions in [vec![], vec![1.5], vec![0.0]] {
        let bad = ShiftConfig {
            fractions,
            ..Default::default()
        };
        assert!(run_covariate_shift(&data, &bad, 8, 5, 1).is_err());
    }
}
