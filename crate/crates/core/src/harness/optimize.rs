//! Policy optimization from imputed partial feedback: each replicate splits
//! the data, logs the training part uniformly, completes the cost vectors by
//! IPS or DR imputation, trains each learner and reports its test error.

use serde::{Deserialize, Serialize};

use super::eval::full_feedback_costs;
use super::{run_replicates, sign_test_p, split_indices};
use crate::datagen::{multiclass_to_bandit, MulticlassDataset};
use crate::error::{Error, Result};
use crate::learn::{
    dlm_train, filter_tree_train, fit_reward_model_per_action, impute_costs, CostMatrixExample,
    DlmOptions, StumpLearner,
};
use crate::policy::{ConstantReward, RewardModel};
use crate::rng::{derive_seed, streams};
use crate::stats::{mean, sample_std};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Dlm,
    FilterTree,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Dlm => "dlm",
            LearnerKind::FilterTree => "filter_tree",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationMode {
    Ips,
    Dr,
    /// All costs observed; a reference point, not an imputation.
    Full,
}

impl ImputationMode {
    pub fn name(self) -> &'static str {
        match self {
            ImputationMode::Ips => "ips",
            ImputationMode::Dr => "dr",
            ImputationMode::Full => "full",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    pub train_fraction: f64,
    pub lambda: f64,
    pub learners: Vec<LearnerKind>,
    pub imputations: Vec<ImputationMode>,
    pub dlm: DlmOptions,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            lambda: 1.0,
            learners: vec![LearnerKind::Dlm, LearnerKind::FilterTree],
            imputations: vec![ImputationMode::Ips, ImputationMode::Dr],
            dlm: DlmOptions::default(),
        }
    }
}

impl OptimizeConfig {
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
        if self.learners.is_empty() || self.imputations.is_empty() {
            return Err(Error::validation(
                "select at least one learner and one imputation mode",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRow {
    pub replicate: usize,
    pub seed: u64,
    pub learner: LearnerKind,
    pub imputation: ImputationMode,
    pub test_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSummary {
    pub learner: LearnerKind,
    pub imputation: ImputationMode,
    pub mean_error: f64,
    pub std: f64,
    pub replicates: usize,
    /// Paired comparison against IPS (DR rows only); ties are dropped.
    pub dr_wins: Option<usize>,
    pub dr_losses: Option<usize>,
    pub sign_test_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOutput {
    pub rows: Vec<OptimizeRow>,
    pub summaries: Vec<OptimizeSummary>,
}

impl OptimizeOutput {
    pub fn errors(&self, learner: LearnerKind, imputation: ImputationMode) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.learner == learner && r.imputation == imputation)
            .map(|r| r.test_error)
            .collect()
    }
}

fn train_and_test(
    learner: LearnerKind,
    costs: &[CostMatrixExample],
    test: &MulticlassDataset,
    options: &DlmOptions,
    seed: u64,
) -> Result<f64> {
    Ok(match learner {
        LearnerKind::Dlm => {
            let model = dlm_train(costs, options, seed)?.model;
            test.error_rate(|x| model.predict(x))
        }
        LearnerKind::FilterTree => {
            let tree = filter_tree_train(costs, &StumpLearner, seed)?;
            test.error_rate(|x| tree.predict(x))
        }
    })
}

pub fn run_optimize(
    data: &MulticlassDataset,
    config: &OptimizeConfig,
    replicates: usize,
    seed: u64,
    workers: usize,
) -> Result<OptimizeOutput> {
    config.validate()?;
    if replicates == 0 {
        return Err(Error::validation("replicates must be at least 1"));
    }
    if data.k < 2 {
        return Err(Error::validation("optimization needs K >= 2"));
    }
    let per_rep = run_replicates(replicates, workers, |r| {
        let rep_seed = derive_seed(seed, streams::SPLIT, r as u64);
        let parts = split_indices(data.len(), &[config.train_fraction], rep_seed);
        let (train, test) = (data.subset(&parts[0]), data.subset(&parts[1]));
        if train.is_empty() || test.is_empty() {
            return Err(Error::validation(
                "split left an empty training or test part",
            ));
        }
        let events = multiclass_to_bandit(&train, derive_seed(rep_seed, streams::LOGGER, 0));
        let mu = 1.0 / data.k as f64;
        let mut rows = Vec::new();
        for &mode in &config.imputations {
            let costs = match mode {
                ImputationMode::Full => full_feedback_costs(&train),
                ImputationMode::Ips | ImputationMode::Dr => {
                    let model: Box<dyn RewardModel> = if mode == ImputationMode::Dr {
                        Box::new(fit_reward_model_per_action(&events, data.k, config.lambda)?)
                    } else {
                        Box::new(ConstantReward(0.0))
                    };
                    events
                        .iter()
                        .map(|e| impute_costs(e, model.as_ref(), mu, data.k))
                        .collect::<Result<Vec<_>>>()?
                }
            };
            for &learner in &config.learners {
                let test_error = train_and_test(
                    learner,
                    &costs,
                    &test,
                    &config.dlm,
                    derive_seed(rep_seed, streams::TRAIN, 0),
                )?;
                rows.push(OptimizeRow {
                    replicate: r,
                    seed: rep_seed,
                    learner,
                    imputation: mode,
                    test_error,
                });
            }
        }
        Ok(rows)
    })?;
    let rows: Vec<OptimizeRow> = per_rep.into_iter().flatten().collect();
    let mut out = OptimizeOutput {
        rows,
        summaries: Vec::new(),
    };
    for &learner in &config.learners {
        for &mode in &config.imputations {
            let errs = out.errors(learner, mode);
            let (mut wins, mut losses, mut p) = (None, None, None);
            if mode == ImputationMode::Dr && config.imputations.contains(&ImputationMode::Ips) {
                let ips = out.errors(learner, ImputationMode::Ips);
                let w = errs.iter().zip(&ips).filter(|(d, i)| d < i).count();
                let l = errs.iter().zip(&ips).filter(|(d, i)| d > i).count();
                wins = Some(w);
                losses = Some(l);
                p = Some(sign_test_p(w, l));
            }
            out.summaries.push(OptimizeSummary {
                learner,
                imputation: mode,
                mean_error: mean(&errs),
                std: if errs.len() > 1 {
                    sample_std(&errs)
                } else {
                    0.0
                },
                replicates: errs.len(),
                dr_wins: wins,
                dr_losses: losses,
                sign_test_p: p,
            });
        }
    }
    Ok(out)
}
