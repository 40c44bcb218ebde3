mod common;

use std::collections::HashMap;

use common::*;
use dreval::dgp::{sample_log, TableReward};
use dreval::learn::{
    dlm_train, filter_tree_train, fit_reward_model_per_action, impute_costs, logistic_fit,
    mean_cost, BinaryClassifier, BinaryLearner, CostMatrixExample, DecisionStump, DlmOptions,
    EpsilonGreedyPolicy, LinearModel, LogisticOptions, StumpLearner, WeightedExample,
};
use dreval::rng::seeded;
use dreval::{Context, DiscreteDgp, LogEvent, NonstationaryPolicy, RewardModel, SparseVec};
use proptest::prelude::*;
use rand::Rng;

type Key = Vec<(u32, u64)>;

fn key(x: &SparseVec) -> Key {
    x.iter().map(|(i, v)| (i, v.to_bits())).collect()
}

/// Memorizes the heaviest label seen for each distinct feature vector.
struct MemoLearner;

struct Memo(HashMap<Key, bool>);

impl BinaryClassifier for Memo {
    fn predict(&self, x: &SparseVec) -> bool {
        self.0.get(&key(x)).copied().unwrap_or(false)
    }
}

impl BinaryLearner for MemoLearner {
    fn train(&self, examples: &[WeightedExample<'_>], _seed: u64) -> Box<dyn BinaryClassifier> {
        let mut votes: HashMap<Key, f64> = HashMap::new();
        for e in examples {
            *votes.entry(key(e.features)).or_default() +=
                if e.label { e.weight } else { -e.weight };
        }
        Box::new(Memo(votes.into_iter().map(|(k, v)| (k, v > 0.0)).collect()))
    }
}

fn distinct_examples(seed: u64, n: usize, k: usize, dim: usize) -> Vec<CostMatrixExample> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|i| {
            let mut x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            x.push(i as f64);
            let costs = (0..k).map(|_| rng.random::<f64>()).collect();
            CostMatrixExample {
                features: SparseVec::from_dense(&x),
                costs,
            }
        })
        .collect()
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, a| if v[a] < v[best] { a } else { best })
}

fn stump_error(stump: &DecisionStump, examples: &[WeightedExample<'_>]) -> f64 {
    let total: f64 = examples.iter().map(|e| e.weight).sum();
    let wrong: f64 = examples
        .iter()
        .filter(|e| stump.predict(e.features) != e.label)
        .map(|e| e.weight)
        .sum();
    wrong / total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stump_error_is_at_most_half_and_matches_its_report(
        rows in prop::collection::vec((prop::collection::vec(-2.0f64..2.0, 3), any::<bool>(), 0.01f64..5.0), 1..30)
    ) {
        let feats: Vec<SparseVec> = rows.iter().map(|(x, _, _)| SparseVec::from_dense(x)).collect();
        let ex: Vec<WeightedExample> = rows
            .iter()
            .zip(&feats)
            .map(|((_, y, w), f)| WeightedExample { features: f, label: *y, weight: *w })
            .collect();
        let (stump, err) = DecisionStump::fit(&ex);
        let err = err / ex.iter().map(|e| e.weight).sum::<f64>();
        prop_assert!(err <= 0.5 + 1e-12);
        prop_assert!((stump_error(&stump, &ex) - err).abs() < 1e-9);
        // exhaustive check over every observed threshold and both polarities
        for f in 0..3u32 {
            for t in feats.iter().map(|x| x.get(f)) {
                for positive in [true, false] {
                    let cand = DecisionStump { feature: Some(f), threshold: t, positive };
                    prop_assert!(err <= stump_error(&cand, &ex) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn filter_tree_shape_for_powers_of_two(log_k in 1u32..5, seed in 0u64..1000) {
        let k = 1usize << log_k;
        let ex = distinct_examples(seed, 20, k, 2);
        let tree = filter_tree_train(&ex, &StumpLearner, seed).unwrap();
        prop_assert_eq!(tree.num_classifiers(), k - 1);
        prop_assert_eq!(tree.depth(), log_k as usize);
        for e in &ex {
            prop_assert_eq!(tree.predict_with_path(&e.features).1, log_k as usize);
        }
    }

    #[test]
    fn filter_tree_path_length_is_ceil_log2(k in 2usize..20, seed in 0u64..1000) {
        let ex = distinct_examples(seed, 10, k, 2);
        let tree = filter_tree_train(&ex, &StumpLearner, seed).unwrap();
        let depth = (k as f64).log2().ceil() as usize;
        prop_assert_eq!(tree.num_classifiers(), k - 1);
        for e in &ex {
            let (a, steps) = tree.predict_with_path(&e.features);
            prop_assert!(a < k);
            prop_assert_eq!(steps, depth);
        }
    }

    #[test]
    fn imputation_slots(seed in 0u64..10_000, k in 2usize..6, mu in 0.01f64..=1.0, l in 0.0f64..=1.0, lhat in 0.0f64..=1.0) {
        let a = (seed as usize) % k;
        let ev = LogEvent::new(Context::new(SparseVec::one_hot(0)), a, l, mu).unwrap();
        let model = dreval::policy::ConstantReward(lhat);
        let ex = impute_costs(&ev, &model, mu, k).unwrap();
        prop_assert_eq!(ex.costs.len(), k);
        for (b, c) in ex.costs.iter().enumerate() {
            if b == a {
                prop_assert!((c - (lhat + (l - lhat) / mu)).abs() < 1e-12);
            } else {
                prop_assert_eq!(*c, lhat);
            }
        }
    }
}

#[test]
fn oracle_base_learner_recovers_the_argmin() {
    for seed in 0..20 {
        let ex = distinct_examples(seed, 60, 4, 3);
        let tree = filter_tree_train(&ex, &MemoLearner, seed).unwrap();
        for e in &ex {
            assert_eq!(tree.predict(&e.features), argmin(&e.costs), "seed {seed}");
        }
        assert_eq!(
            mean_cost(&ex, |x| tree.predict(x)),
            ex.iter().map(|e| e.costs[argmin(&e.costs)]).sum::<f64>() / ex.len() as f64
        );
    }
}

#[test]
fn two_action_tree_agrees_with_its_base_learner_on_cost_differences() {
    let ex = distinct_examples(4, 80, 2, 3);
    let tree = filter_tree_train(&ex, &StumpLearner, 0).unwrap();
    let binary: Vec<WeightedExample> = ex
        .iter()
        .map(|e| WeightedExample {
            features: &e.features,
            label: e.costs[1] < e.costs[0],
            weight: (e.costs[0] - e.costs[1]).abs(),
        })
        .filter(|w| w.weight > 0.0)
        .collect();
    let (stump, _) = DecisionStump::fit(&binary);
    for e in &ex {
        assert_eq!(
            tree.predict(&e.features),
            usize::from(stump.predict(&e.features))
        );
    }
}

#[test]
fn imputation_is_unbiased_per_slot_by_enumeration() {
    for seed in 0..50 {
        let dgp = random_dgp(seed, 5, 4, 3);
        let mut rng = seeded(seed);
        let (nx, k) = (dgp.num_contexts(), dgp.num_actions());
        let model = TableReward::new(random_table(&mut rng, nx, k, 0.0, 1.0));
        for x in 0..nx {
            let mut expected = vec![0.0; k];
            for a in 0..k {
                let law = dgp.reward_law(x, a);
                for (r, pr) in law.values.iter().zip(&law.probs) {
                    let ev = LogEvent::new(
                        Context::new(DiscreteDgp::context_features(x)),
                        a,
                        *r,
                        dgp.mu(x, a),
                    )
                    .unwrap();
                    let ex = impute_costs(&ev, &model, dgp.mu(x, a), k).unwrap();
                    for (e, c) in expected.iter_mut().zip(&ex.costs) {
                        *e += dgp.mu(x, a) * pr * c;
                    }
                }
            }
            for (a, e) in expected.iter().enumerate() {
                assert!(
                    (e - dgp.r_star(x, a)).abs() < 1e-12,
                    "seed {seed} x {x} a {a}"
                );
            }
        }
    }
}

#[test]
fn reward_model_approaches_the_noise_floor() {
    let dgp = dreval::dgp::make_discrete_dgp(&dreval::dgp::DgpSpec {
        contexts: 6,
        actions: 4,
        support: 3,
        deterministic_rewards: false,
        seed: 11,
    })
    .unwrap();
    let excess = |n: usize| {
        let log = sample_log(&dgp, n, 5);
        let m = fit_reward_model_per_action(&log, dgp.num_actions(), 1.0).unwrap();
        let mut err = 0.0;
        for x in 0..dgp.num_contexts() {
            for a in 0..dgp.num_actions() {
                let p = dgp.context_prob(x) * dgp.mu(x, a);
                err += p
                    * (m.predict(&DiscreteDgp::context_features(x), a) - dgp.r_star(x, a)).powi(2);
            }
        }
        err
    };
    let (small, large) = (excess(100), excess(10_000));
    assert!(large < small, "{large} vs {small}");
    assert!(large < 1e-3, "{large}");
}

fn multiclass_costs(seed: u64, n: usize, k: usize) -> Vec<CostMatrixExample> {
    let mut rng = seeded(seed);
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    (0..n)
        .map(|_| {
            let y = rng.random_range(0..k);
            let x: Vec<f64> = centers[y]
                .iter()
                .map(|c| c + rng.random_range(-0.7..0.7))
                .collect();
            let costs = (0..k).map(|a| if a == y { 0.0 } else { 1.0 }).collect();
            CostMatrixExample {
                features: SparseVec::from_dense(&x),
                costs,
            }
        })
        .collect()
}

#[test]
fn dlm_is_deterministic_and_keeps_the_best_restart() {
    let ex = multiclass_costs(3, 120, 3);
    let opts = DlmOptions {
        restarts: 5,
        max_batches: 200,
        ..DlmOptions::default()
    };
    let a = dlm_train(&ex, &opts, 9).unwrap();
    let b = dlm_train(&ex, &opts, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.restart_costs.len(), 5);
    assert!(a.restart_costs.iter().all(|c| a.training_cost <= *c));
    let recomputed = mean_cost(&ex, |x| a.model.predict(x));
    assert!((recomputed - a.training_cost).abs() < 1e-12);
    assert!(a.training_cost < 0.3, "{}", a.training_cost);
}

#[test]
fn logistic_fit_is_deterministic() {
    let ex = multiclass_costs(5, 200, 2);
    let data: Vec<(SparseVec, bool)> = ex
        .iter()
        .map(|e| (e.features.clone(), e.costs[1] == 0.0))
        .collect();
    let opts = LogisticOptions::default();
    assert_eq!(logistic_fit(&data, 3, opts), logistic_fit(&data, 3, opts));
}

#[test]
fn model_json_round_trips() {
    let ex = multiclass_costs(8, 60, 4);
    let fit = dlm_train(
        &ex,
        &DlmOptions {
            restarts: 2,
            ..DlmOptions::default()
        },
        1,
    )
    .unwrap();
    let back = LinearModel::from_json(&fit.model.to_json()).unwrap();
    assert_eq!(back, fit.model);
    assert!(LinearModel::from_json("{\"kind\":\"dlm\"}").is_err());
}

#[test]
fn egreedy_replays_identically() {
    let ex = multiclass_costs(2, 40, 3);
    let warm: Vec<(SparseVec, Vec<usize>)> = ex
        .iter()
        .map(|e| (e.features.clone(), vec![argmin(&e.costs)]))
        .collect();
    let make = || EpsilonGreedyPolicy::new(&warm, 3, 0.1, 15, LogisticOptions::default()).unwrap();
    let (p, q) = (make(), make());
    let (mut sp, mut sq) = (p.initial_state(), q.initial_state());
    let stream = multiclass_costs(6, 50, 3);
    let mut rng = seeded(1);
    let probe = &stream[0].features;
    for e in &stream {
        let a = rng.random_range(0..3);
        p.observe(&mut sp, &e.features, a, e.costs[a]);
        q.observe(&mut sq, &e.features, a, e.costs[a]);
        assert_eq!(p.distribution(probe, &sp), q.distribution(probe, &sq));
    }
    assert_eq!(sp.rounds_played(), 50);
    let d = p.distribution(probe, &sp);
    assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(
        d.iter()
            .filter(|v| (**v - (0.9 + 0.1 / 3.0)).abs() < 1e-12)
            .count()
            == 1
    );
}
