//! Direct loss minimization for linear cost-sensitive classifiers.
//!
//! Each batch moves every example's score toward the "better" action
//! `argmax{x·θ_a − ε·l_a}` and away from the current prediction
//! `argmax{x·θ_a}`. The learning rate is `t^{−0.3}/2` at batch `t`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{with_bias, CostMatrixExample, LinearModel, ModelKind};
use crate::data::SparseVec;
use crate::error::{Error, Result};
use crate::policy::argmax;
use crate::rng::{derive_seed, normal, seeded, streams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DlmOptions {
    pub epsilon: f64,
    pub restarts: usize,
    pub max_batches: usize,
    /// Stop once no weight moves more than this in a batch.
    pub tolerance: f64,
    /// Standard deviation of the random starting weights.
    pub init_scale: f64,
}

impl Default for DlmOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            restarts: 20,
            max_batches: 500,
            tolerance: 1e-6,
            init_scale: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlmFit {
    pub model: LinearModel,
    pub training_cost: f64,
    /// Training cost of each restart's returned weights.
    pub restart_costs: Vec<f64>,
}

struct Run {
    theta: Vec<Vec<f64>>,
    cost: f64,
}

fn scores(theta: &[Vec<f64>], x: &SparseVec) -> Vec<f64> {
    theta.iter().map(|w| x.dot(w)).collect()
}

fn train_once(
    data: &[(SparseVec, &[f64])],
    k: usize,
    dim: usize,
    options: &DlmOptions,
    seed: u64,
) -> Run {
    let mut rng = seeded(seed);
    let mut theta: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..=dim)
                .map(|_| options.init_scale * normal(&mut rng))
                .collect()
        })
        .collect();
    let n = data.len() as f64;
    let mut best = Run {
        theta: theta.clone(),
        cost: f64::INFINITY,
    };
    for t in 1..=options.max_batches {
        let mut step = vec![vec![0.0; dim + 1]; k];
        let mut cost = 0.0;
        for (x, costs) in data {
            let s = scores(&theta, x);
            let predicted = argmax(&s);
            cost += costs[predicted];
            let better: Vec<f64> = s
                .iter()
                .zip(costs.iter())
                .map(|(v, l)| v - options.epsilon * l)
                .collect();
            let toward = argmax(&better);
            if toward != predicted {
                x.axpy_into(1.0 / n, &mut step[toward]);
                x.axpy_into(-1.0 / n, &mut step[predicted]);
            }
        }
        let cost = cost / n;
        if cost < best.cost {
            best = Run {
                theta: theta.clone(),
                cost,
            };
        }
        let eta = (t as f64).powf(-0.3) / 2.0;
        let mut largest = 0.0f64;
        for (w, d) in theta.iter_mut().zip(&step) {
            for (wi, di) in w.iter_mut().zip(d) {
                *wi += eta * di;
                largest = largest.max((eta * di).abs());
            }
        }
        if largest < options.tolerance {
            break;
        }
    }
    let final_cost = data
        .iter()
        .map(|(x, c)| c[argmax(&scores(&theta, x))])
        .sum::<f64>()
        / n;
    if final_cost < best.cost {
        best = Run {
            theta,
            cost: final_cost,
        };
    }
    best
}

/// Trains from `options.restarts` random starts and keeps the run with the
/// lowest training cost. Within a run the lowest-cost iterate is kept.
pub fn dlm_train(
    examples: &[CostMatrixExample],
    options: &DlmOptions,
    seed: u64,
) -> Result<DlmFit> {
    let Some(first) = examples.first() else {
        return Err(Error::domain("DLM needs at least one example"));
    };
    let k = first.num_actions();
    if k < 2 {
        return Err(Error::domain("DLM needs at least two actions"));
    }
    if examples.iter().any(|e| e.num_actions() != k) {
        return Err(Error::validation("cost vectors have differing lengths"));
    }
    if options.restarts == 0 {
        return Err(Error::domain("DLM needs at least one restart"));
    }
    let dim = examples.iter().map(|e| e.features.dim()).max().unwrap_or(0);
    let data: Vec<(SparseVec, &[f64])> = examples
        .iter()
        .map(|e| (with_bias(&e.features, dim), e.costs.as_slice()))
        .collect();
    let runs: Vec<Run> = (0..options.restarts)
        .into_par_iter()
        .map(|r| {
            train_once(
                &data,
                k,
                dim,
                options,
                derive_seed(seed, streams::MODEL, r as u64),
            )
        })
        .collect();
    let restart_costs: Vec<f64> = runs.iter().map(|r| r.cost).collect();
    let best = argmax(&restart_costs.iter().map(|c| -c).collect::<Vec<_>>());
    let run = &runs[best];
    let mut weights = Vec::with_capacity(k);
    let mut intercepts = Vec::with_capacity(k);
    for w in &run.theta {
        weights.push(w[..dim].to_vec());
        intercepts.push(w[dim]);
    }
    Ok(DlmFit {
        model: LinearModel {
            kind: ModelKind::Dlm,
            k,
            epsilon: Some(options.epsilon),
            weights,
            intercepts,
        },
        training_cost: run.cost,
        restart_costs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::mean_cost;

    fn separable() -> Vec<CostMatrixExample> {
        (0..40)
            .map(|i| {
                let v = i as f64 / 39.0 * 2.0 - 1.0 + if i < 20 { -0.1 } else { 0.1 };
                let costs = if v > 0.0 {
                    vec![1.0, 0.0]
                } else {
                    vec![0.0, 1.0]
                };
                CostMatrixExample {
                    features: SparseVec::from_dense(&[v]),
                    costs,
                }
            })
            .collect()
    }

    #[test]
    fn separable_reaches_zero_training_error() {
        let data = separable();
        let fit = dlm_train(&data, &DlmOptions::default(), 5).unwrap();
        assert_eq!(fit.training_cost, 0.0);
        assert_eq!(mean_cost(&data, |x| fit.model.predict(x)), 0.0);
    }

    #[test]
    fn best_restart_is_returned_and_deterministic() {
        let data: Vec<CostMatrixExample> = (0..30)
            .map(|i| CostMatrixExample {
                features: SparseVec::from_dense(&[(i % 5) as f64, (i % 3) as f64]),
                costs: vec![((i * 7) % 4) as f64 / 3.0, ((i * 3) % 5) as f64 / 4.0, 0.5],
            })
            .collect();
        let opts = DlmOptions {
            restarts: 5,
            ..DlmOptions::default()
        };
        let fit = dlm_train(&data, &opts, 9).unwrap();
        assert!(fit.restart_costs.iter().all(|&c| fit.training_cost <= c));
        assert!((mean_cost(&data, |x| fit.model.predict(x)) - fit.training_cost).abs() < 1e-12);
        assert_eq!(dlm_train(&data, &opts, 9).unwrap(), fit);
    }

    #[test]
    fn agreement_is_a_fixed_point() {
        // every example already prefers its current prediction: no update at all
        let data = vec![CostMatrixExample {
            features: SparseVec::from_dense(&[1.0]),
            costs: vec![0.0, 0.0],
        }];
        let opts = DlmOptions {
            restarts: 1,
            init_scale: 0.0,
            ..DlmOptions::default()
        };
        let fit = dlm_train(&data, &opts, 1).unwrap();
        assert!(fit.model.weights.iter().flatten().all(|&w| w == 0.0));
    }
}
