mod common;

use common::*;
use dreval::datagen::{
    biased_logger_probs, covariate_shift_transform, multiclass_to_bandit, multilabel_biased_logger,
    synthetic_multiclass, synthetic_multilabel, synthetic_regression, MulticlassDataset,
    MulticlassSpec, MultilabelDataset, MultilabelSpec, RegressionDataset, RegressionSpec,
};
use dreval::dgp::{make_discrete_dgp, policy_value_exact, sample_log, DgpSpec, TablePolicy};
use dreval::estimators::ips_estimate;
use dreval::policy::{DeterministicPolicy, LoggedPropensity};
use dreval::rng::seeded;
use dreval::{DiscreteDgp, SparseVec};
use proptest::prelude::*;
use rand::Rng;

/// |observed − expected| within `z` binomial standard errors.
fn within_binomial(count: usize, n: usize, p: f64, z: f64) -> bool {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    (count as f64 / n as f64 - p).abs() <= z * se
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn biased_logger_probabilities_normalize(labels in prop::collection::btree_set(0usize..8, 1..8), scores in prop::collection::vec(0.1f64..=1.0, 8)) {
        let labels: Vec<usize> = labels.into_iter().collect();
        let p = biased_logger_probs(&labels, &scores);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| *v > 0.0));
        for &a in &labels {
            prop_assert!(p[a] >= 0.7 / labels.len() as f64);
        }
    }

    #[test]
    fn multiclass_transform_preserves_order_and_is_seeded(seed in 0u64..1000, k in 1usize..6) {
        let mut rng = seeded(seed);
        let examples: Vec<(SparseVec, usize)> = (0..50)
            .map(|i| (SparseVec::from_dense(&[i as f64, rng.random()]), rng.random_range(0..k)))
            .collect();
        let data = MulticlassDataset::new(k, examples.clone()).unwrap();
        let events = multiclass_to_bandit(&data, seed);
        prop_assert_eq!(&events, &multiclass_to_bandit(&data, seed));
        prop_assert_eq!(events.len(), examples.len());
        for (ev, (x, y)) in events.iter().zip(&examples) {
            prop_assert_eq!(ev.features(), x);
            prop_assert_eq!(ev.propensity, 1.0 / k as f64);
            prop_assert_eq!(ev.outcome, if ev.action == *y { 0.0 } else { 1.0 });
            prop_assert!(ev.action < k);
        }
    }

    #[test]
    fn sampled_propensities_are_exact(seed in 0u64..1000) {
        let dgp = random_dgp(seed, 8, 5, 3);
        for ev in sample_log(&dgp, 200, seed) {
            let x = DiscreteDgp::context_index(ev.features()).unwrap();
            prop_assert_eq!(ev.propensity, dgp.mu(x, ev.action));
            prop_assert!(ev.propensity > 0.0);
            prop_assert!(dgp.reward_law(x, ev.action).values.contains(&ev.outcome));
        }
    }
}

#[test]
fn single_action_multiclass_is_always_correct() {
    let data = MulticlassDataset::new(1, vec![(SparseVec::one_hot(0), 0); 20]).unwrap();
    for ev in multiclass_to_bandit(&data, 3) {
        assert_eq!((ev.action, ev.outcome, ev.propensity), (0, 0.0, 1.0));
    }
}

#[test]
fn uniform_logging_hits_the_label_a_quarter_of_the_time() {
    let n = 100_000;
    let examples = (0..n).map(|i| (SparseVec::one_hot(0), i % 4)).collect();
    let data = MulticlassDataset::new(4, examples).unwrap();
    let events = multiclass_to_bandit(&data, 17);
    let hits = events.iter().filter(|e| e.outcome == 0.0).count();
    assert!(within_binomial(hits, n, 0.25, 3.0), "{hits}");
}

#[test]
fn ips_of_the_label_oracle_has_zero_loss() {
    let data = synthetic_multiclass(
        &MulticlassSpec {
            n: 3000,
            ..MulticlassSpec::default()
        },
        2,
    )
    .unwrap();
    let events = multiclass_to_bandit(&data, 5);
    let labels: Vec<usize> = data.examples.iter().map(|(_, y)| *y).collect();
    let losses: Vec<f64> = events
        .iter()
        .zip(&labels)
        .map(|(e, y)| {
            if e.action == *y {
                e.outcome / e.propensity
            } else {
                0.0
            }
        })
        .collect();
    assert!(losses.iter().all(|l| *l == 0.0));
    // the estimator agrees on the same log with a policy that reads the label back
    let by_features: std::collections::HashMap<Vec<u64>, usize> = data
        .examples
        .iter()
        .map(|(x, y)| (x.values().iter().map(|v| v.to_bits()).collect(), *y))
        .collect();
    let policy = DeterministicPolicy::new(data.k, move |x: &SparseVec| {
        by_features[&x.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()]
    });
    let ips = ips_estimate(&events, &policy, &LoggedPropensity).unwrap();
    assert_eq!(ips.estimate, 0.0);
}

#[test]
fn full_label_set_makes_the_correct_term_uniform() {
    let k = 5;
    let labels: Vec<usize> = (0..k).collect();
    let mut rng = seeded(1);
    for _ in 0..100 {
        let s: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..=1.0)).collect();
        let p = biased_logger_probs(&labels, &s);
        assert!(p.iter().all(|v| *v >= 0.7 / k as f64));
    }
}

#[test]
fn biased_logger_frequencies_match_the_formula() {
    let k = 4;
    let data = MultilabelDataset::new(k, vec![(SparseVec::one_hot(0), vec![1, 3])]).unwrap();
    // average the per-draw probabilities over the random scores, then compare counts
    let draws = 1_000_000;
    let mut counts = vec![0usize; k];
    let mut expected = vec![0.0; k];
    let replicated = MultilabelDataset::new(k, vec![data.examples[0].clone(); draws]).unwrap();
    for ev in multilabel_biased_logger(&replicated, 9).unwrap() {
        counts[ev.action] += 1;
        let h = ev.context.hidden().unwrap();
        for (e, p) in expected
            .iter_mut()
            .zip(biased_logger_probs(&h.labels, &h.scores))
        {
            *e += p / draws as f64;
        }
        assert_eq!(
            ev.outcome,
            if h.labels.contains(&ev.action) {
                0.0
            } else {
                1.0
            }
        );
    }
    for a in 0..k {
        assert!(
            within_binomial(counts[a], draws, expected[a], 3.0),
            "action {a}: {} vs {}",
            counts[a],
            expected[a]
        );
    }
    // labelled actions carry at least the 0.35 correct-answer share
    assert!(expected[1] > 0.35 && expected[3] > 0.35);
}

#[test]
fn biased_logger_rejects_one_action() {
    let data = MultilabelDataset::new(1, vec![(SparseVec::one_hot(0), vec![0])]).unwrap();
    assert!(multilabel_biased_logger(&data, 0).is_err());
}

#[test]
fn generators_are_seed_deterministic() {
    let ml = MultilabelSpec {
        n: 200,
        ..MultilabelSpec::default()
    };
    assert_eq!(
        synthetic_multilabel(&ml, 4).unwrap(),
        synthetic_multilabel(&ml, 4).unwrap()
    );
    let mc = MulticlassSpec {
        n: 200,
        ..MulticlassSpec::default()
    };
    assert_eq!(
        synthetic_multiclass(&mc, 4).unwrap(),
        synthetic_multiclass(&mc, 4).unwrap()
    );
    let rg = RegressionSpec {
        n: 200,
        ..RegressionSpec::default()
    };
    assert_eq!(
        synthetic_regression(&rg, 4).unwrap(),
        synthetic_regression(&rg, 4).unwrap()
    );
    let data = synthetic_multilabel(&ml, 4).unwrap();
    assert_eq!(
        multilabel_biased_logger(&data, 8).unwrap(),
        multilabel_biased_logger(&data, 8).unwrap()
    );
    let spec = DgpSpec {
        seed: 12,
        ..DgpSpec::default()
    };
    assert_eq!(
        make_discrete_dgp(&spec).unwrap(),
        make_discrete_dgp(&spec).unwrap()
    );
}

#[test]
fn constant_projections_are_degenerate() {
    let same = RegressionDataset::new(vec![(SparseVec::from_dense(&[1.0, 2.0]), 3.0); 10]).unwrap();
    assert!(covariate_shift_transform(&same, 0).is_err());
    let zero = RegressionDataset::new(vec![
        (SparseVec::default(), 1.0),
        (SparseVec::default(), 2.0),
    ])
    .unwrap();
    assert!(covariate_shift_transform(&zero, 0).is_err());
}

#[test]
fn shift_direction_is_unit_and_reveal_probability_positive() {
    let data = synthetic_regression(
        &RegressionSpec {
            n: 5000,
            ..RegressionSpec::default()
        },
        3,
    )
    .unwrap();
    let shift = covariate_shift_transform(&data, 3).unwrap();
    let norm: f64 = shift.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-9);
    for (x, _) in &data.examples {
        let p = shift.reveal_probability(x);
        assert!(p > 0.0 && p <= 1.0);
    }
    // the reveal-everything target has the mean rescaled response as its value
    let truth = shift.true_mean(&data);
    let full: Vec<f64> = data
        .examples
        .iter()
        .map(|(_, v)| shift.rescaled(*v))
        .collect();
    assert!((full.iter().sum::<f64>() / full.len() as f64 - truth).abs() < 1e-12);
}

#[test]
fn shift_direction_matches_the_covariance_eigenvector() {
    // two correlated features: the principal direction is the dense eigenvector
    let mut rng = seeded(2);
    let examples: Vec<(SparseVec, f64)> = (0..4000)
        .map(|_| {
            let z: f64 = rng.random_range(0.0..1.0);
            let e: f64 = rng.random_range(-0.1..0.1);
            (SparseVec::from_dense(&[z + e, 2.0 * z - e]), z)
        })
        .collect();
    let data = RegressionDataset::new(examples).unwrap();
    let shift = covariate_shift_transform(&data, 0).unwrap();
    let n = data.len() as f64;
    let mean: Vec<f64> = (0..2)
        .map(|j| {
            data.examples
                .iter()
                .map(|(x, _)| x.get(j as u32))
                .sum::<f64>()
                / n
        })
        .collect();
    let mut c = [[0.0; 2]; 2];
    for (x, _) in &data.examples {
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] += (x.get(i as u32) - mean[i]) * (x.get(j as u32) - mean[j]) / n;
            }
        }
    }
    // closed-form top eigenvector of a symmetric 2x2 matrix
    let (a, b, d) = (c[0][0], c[0][1], c[1][1]);
    let lambda = 0.5 * (a + d) + (0.25 * (a - d).powi(2) + b * b).sqrt();
    let v = [b, lambda - a];
    let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let cos = ((shift.direction[0] * v[0] + shift.direction[1] * v[1]) / nv).abs();
    assert!(cos > 1.0 - 1e-9, "{cos}");
}

#[test]
fn shift_ips_is_unbiased_on_small_subsamples() {
    let data = synthetic_regression(
        &RegressionSpec {
            n: 20_000,
            ..RegressionSpec::default()
        },
        6,
    )
    .unwrap();
    let shift = covariate_shift_transform(&data, 6).unwrap();
    let truth = shift.true_mean(&data);
    let reveal = DeterministicPolicy::new(2, |_| 1);
    let m = (0.05 * data.len() as f64) as usize;
    let estimates: Vec<f64> = (0..100u64)
        .map(|r| {
            let mut rng = seeded(1000 + r);
            let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..data.len())).collect();
            let log = shift.log(&data, &idx, &mut rng);
            ips_estimate(&log, &reveal, &LoggedPropensity)
                .unwrap()
                .estimate
        })
        .collect();
    let (mean, se) = mean_and_se(&estimates);
    assert!(
        (mean - truth).abs() <= 3.0 * se,
        "{mean} vs {truth} (se {se})"
    );
}

#[test]
fn capacity_limits_are_enforced() {
    for spec in [
        DgpSpec {
            contexts: 17,
            ..DgpSpec::default()
        },
        DgpSpec {
            actions: 9,
            ..DgpSpec::default()
        },
        DgpSpec {
            support: 5,
            ..DgpSpec::default()
        },
    ] {
        assert!(make_discrete_dgp(&spec).is_err());
    }
}

#[test]
fn deterministic_reward_spec_has_no_reward_variance() {
    let dgp = make_discrete_dgp(&DgpSpec {
        deterministic_rewards: true,
        ..DgpSpec::default()
    })
    .unwrap();
    for x in 0..dgp.num_contexts() {
        for a in 0..dgp.num_actions() {
            assert_eq!(dgp.reward_variance(x, a), 0.0);
        }
    }
}

#[test]
fn enumerated_value_matches_policy_value_exact() {
    for seed in 0..50 {
        let dgp = random_dgp(seed, 16, 8, 4);
        let nu = random_policy(&mut seeded(seed), dgp.num_contexts(), dgp.num_actions());
        let exact = policy_value_exact(&dgp, &TablePolicy::new(nu.clone()));
        assert!((exact - enumerate_value(&dgp, &nu)).abs() < 1e-12);
    }
}

#[test]
fn sampled_logs_match_their_law() {
    let dgp = make_discrete_dgp(&DgpSpec {
        contexts: 6,
        actions: 3,
        support: 3,
        deterministic_rewards: false,
        seed: 8,
    })
    .unwrap();
    let n = 100_000;
    let log = sample_log(&dgp, n, 21);
    for x in 0..dgp.num_contexts() {
        let count = log
            .iter()
            .filter(|e| DiscreteDgp::context_index(e.features()) == Some(x))
            .count();
        assert!(
            within_binomial(count, n, dgp.context_prob(x), 3.0),
            "context {x}"
        );
    }
    let rewards: Vec<f64> = log.iter().map(|e| e.outcome).collect();
    let (mean, se) = mean_and_se(&rewards);
    let v_mu = policy_value_exact(&dgp, &TablePolicy::new(dgp.exploration().to_vec()));
    assert!((mean - v_mu).abs() <= 3.0 * se, "{mean} vs {v_mu}");
}
