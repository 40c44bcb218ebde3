//! ε-greedy adaptive classifier over per-action logistic heads.
//!
//! With probability `1 − ε` it plays the action with the highest linear score,
//! otherwise a uniform action. Heads are warm-started on a fully labeled set
//! and refit every `retrain_period` observations on that set plus the online
//! rounds in which the action was played.

use std::sync::Arc;

use super::logistic::{logistic_fit, LogisticOptions};
use super::{LinearModel, ModelKind};
use crate::data::SparseVec;
use crate::error::{Error, Result};
use crate::policy::{argmax, NonstationaryPolicy};

#[derive(Debug, Clone)]
pub struct EpsilonGreedyPolicy {
    k: usize,
    epsilon: f64,
    retrain_period: usize,
    options: LogisticOptions,
    dim: usize,
    /// Per-action warm-start examples: label is "action is correct".
    warm: Vec<Vec<(SparseVec, bool)>>,
    initial: Arc<LinearModel>,
}

#[derive(Debug, Clone)]
pub struct EgreedyState {
    pub heads: Arc<LinearModel>,
    /// Online rounds, grouped by the action played.
    played: Vec<Vec<(SparseVec, bool)>>,
    since_refit: usize,
}

impl EgreedyState {
    pub fn rounds_played(&self) -> usize {
        self.played.iter().map(Vec::len).sum()
    }
}

impl EpsilonGreedyPolicy {
    /// `warm` pairs features with their set of correct actions.
    pub fn new(
        warm: &[(SparseVec, Vec<usize>)],
        k: usize,
        epsilon: f64,
        retrain_period: usize,
        options: LogisticOptions,
    ) -> Result<Self> {
        if warm.is_empty() {
            return Err(Error::domain(
                "epsilon-greedy needs a nonempty warm-start set",
            ));
        }
        if k == 0 || retrain_period == 0 {
            return Err(Error::domain("need K >= 1 and a positive retrain period"));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::domain(format!(
                "epsilon must be in [0,1], got {epsilon}"
            )));
        }
        if let Some(bad) = warm.iter().flat_map(|(_, y)| y).find(|&&a| a >= k) {
            return Err(Error::validation(format!(
                "label {bad} out of range for K={k}"
            )));
        }
        let dim = warm.iter().map(|(x, _)| x.dim()).max().unwrap_or(0);
        let warm: Vec<Vec<(SparseVec, bool)>> = (0..k)
            .map(|a| {
                warm.iter()
                    .map(|(x, y)| (x.clone(), y.contains(&a)))
                    .collect()
            })
            .collect();
        let mut policy = Self {
            k,
            epsilon,
            retrain_period,
            options,
            dim,
            warm,
            initial: Arc::new(LinearModel::zeros(ModelKind::Logistic, k, dim)),
        };
        let empty = vec![Vec::new(); k];
        policy.initial = Arc::new(policy.fit(&empty));
        Ok(policy)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn initial_heads(&self) -> &LinearModel {
        &self.initial
    }

    fn fit(&self, played: &[Vec<(SparseVec, bool)>]) -> LinearModel {
        let mut model = LinearModel::zeros(ModelKind::Logistic, self.k, self.dim);
        model.epsilon = Some(self.epsilon);
        for a in 0..self.k {
            let data: Vec<(SparseVec, bool)> =
                self.warm[a].iter().chain(&played[a]).cloned().collect();
            let head = logistic_fit(&data, self.dim, self.options);
            model.weights[a] = head.weights[0].clone();
            model.intercepts[a] = head.intercepts[0];
        }
        model
    }
}

impl NonstationaryPolicy for EpsilonGreedyPolicy {
    type State = EgreedyState;

    fn num_actions(&self) -> usize {
        self.k
    }

    fn initial_state(&self) -> EgreedyState {
        EgreedyState {
            heads: Arc::clone(&self.initial),
            played: vec![Vec::new(); self.k],
            since_refit: 0,
        }
    }

    fn distribution(&self, x: &SparseVec, state: &EgreedyState) -> Vec<f64> {
        let greedy = argmax(&state.heads.scores(x));
        let explore = self.epsilon / self.k as f64;
        let mut d = vec![explore; self.k];
        d[greedy] += 1.0 - self.epsilon;
        d
    }

    /// `outcome` is the 0/1 loss of the played action.
    fn observe(&self, state: &mut EgreedyState, x: &SparseVec, action: usize, outcome: f64) {
        state.played[action].push((x.clone(), outcome < 0.5));
        state.since_refit += 1;
        if state.since_refit == self.retrain_period {
            state.heads = Arc::new(self.fit(&state.played));
            state.since_refit = 0;
        }
    }
}
