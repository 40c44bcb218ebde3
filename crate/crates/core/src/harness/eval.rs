//! Stationary evaluation on multiclass data: train a target classifier with
//! full feedback on one half, then estimate its error from repeatedly
//! re-logged partial feedback on the other half.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{run_replicates, split_indices, ReplicateSummary};
use crate::data::SparseVec;
use crate::datagen::{multiclass_to_bandit, MulticlassDataset};
use crate::error::{Error, Result};
use crate::estimators::{estimate, Method};
use crate::learn::{
    dlm_train, ridge_fit, CostMatrixExample, DlmOptions, LinearModel, LinearRewardModel, ModelKind,
};
use crate::policy::{DeterministicPolicy, LoggedPropensity, RewardModel};
use crate::rng::{derive_seed, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossModelKind {
    /// Per-action ridge regression on the fully labeled training half.
    #[default]
    Ridge,
    /// The true 0/1 loss of each evaluation example, looked up by features.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub train_fraction: f64,
    pub lambda: f64,
    pub loss_model: LossModelKind,
    pub methods: Vec<Method>,
    pub dlm: DlmOptions,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.5,
            lambda: 1.0,
            loss_model: LossModelKind::Ridge,
            methods: vec![Method::Dm, Method::Ips, Method::Dr],
            dlm: DlmOptions::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::validation(format!(
                "train_fraction must be in (0,1), got {}",
                self.train_fraction
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::validation("lambda must be positive"));
        }
        if self.methods.is_empty() {
            return Err(Error::validation("select at least one estimator"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub replicate: usize,
    pub seed: u64,
    pub method: Method,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    /// Error of the target classifier on the fully labeled evaluation half.
    pub ground_truth: f64,
    pub summaries: Vec<ReplicateSummary>,
    pub rows: Vec<EvalRow>,
}

fn feature_key(x: &SparseVec) -> Vec<u64> {
    x.iter()
        .flat_map(|(i, v)| [u64::from(i), v.to_bits()])
        .collect()
}

struct OracleLoss {
    labels: HashMap<Vec<u64>, usize>,
}

impl RewardModel for OracleLoss {
    fn predict(&self, x: &SparseVec, action: usize) -> f64 {
        match self.labels.get(&feature_key(x)) {
            Some(&y) => f64::from(u8::from(action != y)),
            None => 0.5,
        }
    }
}

/// Per-action ridge fit of the 0/1 loss on fully labeled data.
pub(crate) fn full_feedback_loss_model(
    data: &MulticlassDataset,
    lambda: f64,
) -> Result<LinearRewardModel> {
    let dim = data.dim();
    let mut model = LinearModel::zeros(ModelKind::Ridge, data.k, dim);
    for a in 0..data.k {
        let ex: Vec<(SparseVec, f64)> = data
            .examples
            .iter()
            .map(|(x, y)| (x.clone(), f64::from(u8::from(*y != a))))
            .collect();
        let head = ridge_fit(&ex, lambda)?;
        model.weights[a][..head.weights[0].len()].copy_from_slice(&head.weights[0]);
        model.intercepts[a] = head.intercepts[0];
    }
    Ok(LinearRewardModel { model })
}

pub(crate) fn full_feedback_costs(data: &MulticlassDataset) -> Vec<CostMatrixExample> {
    data.examples
        .iter()
        .map(|(x, y)| CostMatrixExample {
            features: x.clone(),
            costs: (0..data.k).map(|a| f64::from(u8::from(a != *y))).collect(),
        })
        .collect()
}

pub fn run_eval_stationary(
    data: &MulticlassDataset,
    config: &EvalConfig,
    replicates: usize,
    seed: u64,
    workers: usize,
) -> Result<EvalOutput> {
    config.validate()?;
    if replicates == 0 {
        return Err(Error::validation("replicates must be at least 1"));
    }
    if data.k < 2 {
        return Err(Error::validation("evaluation needs K >= 2"));
    }
    let parts = split_indices(
        data.len(),
        &[config.train_fraction],
        derive_seed(seed, streams::SPLIT, 0),
    );
    let (train, test) = (data.subset(&parts[0]), data.subset(&parts[1]));
    if train.is_empty() || test.is_empty() {
        return Err(Error::validation(
            "split left an empty training or evaluation half",
        ));
    }
    let target = dlm_train(
        &full_feedback_costs(&train),
        &config.dlm,
        derive_seed(seed, streams::TRAIN, 0),
    )?
    .model;
    let ground_truth = test.error_rate(|x| target.predict(x));
    let policy = DeterministicPolicy::new(data.k, |x: &SparseVec| target.predict(x));
    let loss_model: Box<dyn RewardModel> = match config.loss_model {
        LossModelKind::Ridge => Box::new(full_feedback_loss_model(&train, config.lambda)?),
        LossModelKind::Oracle => Box::new(OracleLoss {
            labels: test
                .examples
                .iter()
                .map(|(x, y)| (feature_key(x), *y))
                .collect(),
        }),
    };
    let per_rep = run_replicates(replicates, workers, |r| {
        let rep_seed = derive_seed(seed, streams::LOGGER, r as u64);
        let events = multiclass_to_bandit(&test, rep_seed);
        config
            .methods
            .iter()
            .map(|&m| {
                let e = estimate(m, &events, &policy, loss_model.as_ref(), &LoggedPropensity)?;
                Ok(EvalRow {
                    replicate: r,
                    seed: rep_seed,
                    method: m,
                    estimate: e.estimate,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<EvalRow> = per_rep.into_iter().flatten().collect();
    let summaries = config
        .methods
        .iter()
        .map(|&m| {
            let est: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == m)
                .map(|r| r.estimate)
                .collect();
            ReplicateSummary::new(m.name(), ground_truth, &est, 0)
        })
        .collect();
    Ok(EvalOutput {
        ground_truth,
        summaries,
        rows,
    })
}
