//! Learners used by the benchmarks: ridge outcome models, logistic heads,
//! cost imputation, DLM and Filter Tree cost-sensitive classifiers, and the
//! ε-greedy adaptive classifier used as a nonstationary target.

mod dlm;
mod egreedy;
mod filter_tree;
mod linalg;
mod logistic;
mod ridge;

use serde::{Deserialize, Serialize};

use crate::data::{LogEvent, SparseVec};
use crate::error::{Error, Result};
use crate::policy::{argmax, clamp01, RewardModel};

pub use dlm::{dlm_train, DlmFit, DlmOptions};
pub use egreedy::{EgreedyState, EpsilonGreedyPolicy};
pub use filter_tree::{
    filter_tree_train, BinaryClassifier, BinaryLearner, DecisionStump, FilterTree, StumpLearner,
    WeightedExample,
};
pub use logistic::{logistic_fit, sigmoid, LogisticLossModel, LogisticOptions};
pub use ridge::{fit_reward_model_per_action, ridge_fit, LinearRewardModel, DEFAULT_RIDGE_LAMBDA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ridge,
    Logistic,
    Dlm,
}

/// Per-action linear scores `w_a·x + b_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    #[serde(rename = "type")]
    pub kind: ModelKind,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(kind: ModelKind, k: usize, dim: usize) -> Self {
        Self {
            kind,
            k,
            epsilon: None,
            weights: vec![vec![0.0; dim]; k],
            intercepts: vec![0.0; k],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.weights.len() != self.k || self.intercepts.len() != self.k {
            return Err(Error::validation(format!(
                "model declares K={} but has {} weight rows and {} intercepts",
                self.k,
                self.weights.len(),
                self.intercepts.len()
            )));
        }
        let finite = self
            .weights
            .iter()
            .flatten()
            .chain(&self.intercepts)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::validation("model weights must be finite"));
        }
        Ok(())
    }

    pub fn score(&self, x: &SparseVec, action: usize) -> f64 {
        x.dot(&self.weights[action]) + self.intercepts[action]
    }

    pub fn scores(&self, x: &SparseVec) -> Vec<f64> {
        (0..self.k).map(|a| self.score(x, a)).collect()
    }

    /// Highest-scoring action, lowest index on ties.
    pub fn predict(&self, x: &SparseVec) -> usize {
        argmax(&self.scores(x))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)
            .map_err(|e| Error::validation(format!("bad model JSON: {e}")))?;
        m.validate()?;
        Ok(m)
    }
}

/// A fully specified cost vector for one context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrixExample {
    pub features: SparseVec,
    pub costs: Vec<f64>,
}

impl CostMatrixExample {
    pub fn num_actions(&self) -> usize {
        self.costs.len()
    }
}

/// Mean cost of a predictor's choices over a set of examples.
pub fn mean_cost(examples: &[CostMatrixExample], predict: impl Fn(&SparseVec) -> usize) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    examples
        .iter()
        .map(|e| e.costs[predict(&e.features)])
        .sum::<f64>()
        / examples.len() as f64
}

/// Fills in the unobserved costs of a logged event.
///
/// Unlogged slots get `l̂(x,a')`; the logged slot gets the corrected
/// `l̂(x,a) + (l − l̂(x,a))/μ̂`. A constant-zero model gives the IPS imputation.
pub fn impute_costs(
    event: &LogEvent,
    loss_model: &dyn RewardModel,
    mu_hat: f64,
    k: usize,
) -> Result<CostMatrixExample> {
    if !(mu_hat > 0.0) {
        return Err(Error::domain(format!(
            "imputation needs a positive propensity, got {mu_hat}"
        )));
    }
    if event.action >= k {
        return Err(Error::validation(format!(
            "action {} out of range for K={k}",
            event.action
        )));
    }
    let x = event.features();
    let costs = (0..k)
        .map(|a| {
            let base = clamp01(loss_model.predict(x, a));
            if a == event.action {
                base + (event.outcome - base) / mu_hat
            } else {
                base
            }
        })
        .collect();
    Ok(CostMatrixExample {
        features: x.clone(),
        costs,
    })
}

/// Appends a constant-one feature at index `dim`.
pub(crate) fn with_bias(x: &SparseVec, dim: usize) -> SparseVec {
    let mut idx: Vec<u32> = x
        .indices()
        .iter()
        .copied()
        .filter(|&i| (i as usize) < dim)
        .collect();
    let mut val: Vec<f64> = x
        .iter()
        .filter(|(i, _)| (*i as usize) < dim)
        .map(|(_, v)| v)
        .collect();
    idx.push(dim as u32);
    val.push(1.0);
    SparseVec::new(idx, val).expect("indices stay increasing")
}
