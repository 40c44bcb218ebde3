//! Nonstationary evaluation sweep: an ε-greedy classifier warm-started on a
//! small labeled set is evaluated for `T` rounds by DM, rejection-sampling
//! replay (RS), worst-case-multiplier DR-ns (WC) and DR-ns over a grid of
//! quantile levels. Each replicate re-permutes and re-logs the evaluation
//! set and averages over as many consecutive trajectories as the log allows.

use serde::{Deserialize, Serialize};

use super::{run_replicates, split_indices, ReplicateSummary};
use crate::data::LogEvent;
use crate::datagen::{min_logger_probability, multilabel_biased_logger, MultilabelDataset};
use crate::error::{Error, Result};
use crate::learn::{
    logistic_fit, EpsilonGreedyPolicy, LinearModel, LogisticLossModel, LogisticOptions, ModelKind,
};
use crate::nonstat::{dm_ns_run, drns_run_rule, rs_run, wc_run, DrnsResult, MultiplierRule};
use crate::policy::NonstationaryPolicy;
use crate::rng::{categorical, derive_seed, permutation, seeded, streams};
use crate::stats::{mean, std_error};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrnsSweepConfig {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub rhos: Vec<f64>,
    pub c_max: f64,
    pub epsilon: f64,
    pub retrain_period: usize,
    pub init_fraction: f64,
    pub ground_truth_sims: usize,
    pub logistic: LogisticOptions,
}

impl Default for DrnsSweepConfig {
    fn default() -> Self {
        Self {
            horizon: 300,
            rhos: vec![0.0, 0.01, 0.05, 0.1],
            c_max: 1.0,
            epsilon: 0.1,
            retrain_period: 15,
            init_fraction: 0.01,
            ground_truth_sims: 2000,
            logistic: LogisticOptions::default(),
        }
    }
}

impl DrnsSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::validation("T must be at least 1"));
        }
        if !(self.init_fraction > 0.0 && self.init_fraction < 1.0) {
            return Err(Error::validation("init_fraction must be in (0,1)"));
        }
        if let Some(r) = self.rhos.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::validation(format!("rho must be in [0,1], got {r}")));
        }
        if !(self.c_max > 0.0 && self.c_max <= 1.0) {
            return Err(Error::validation("c_max must be in (0,1]"));
        }
        if self.ground_truth_sims == 0 {
            return Err(Error::validation(
                "need at least one ground-truth simulation",
            ));
        }
        Ok(())
    }

    pub fn methods(&self) -> Vec<SweepMethod> {
        let mut m = vec![SweepMethod::Dm, SweepMethod::Rs, SweepMethod::Wc];
        m.extend(self.rhos.iter().map(|&rho| SweepMethod::Drns { rho }));
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMethod {
    /// Replayed history with `r̂` alone, multiplier as DR-ns with `ρ = 0`.
    Dm,
    /// Plain replay at the smallest logging probability.
    Rs,
    /// DR-ns with the multiplier fixed at the smallest logging probability.
    Wc,
    Drns {
        rho: f64,
    },
}

impl SweepMethod {
    pub fn name(&self) -> String {
        match self {
            SweepMethod::Dm => "DM".into(),
            SweepMethod::Rs => "RS".into(),
            SweepMethod::Wc => "WC".into(),
            SweepMethod::Drns { rho } => format!("DR-ns(rho={rho})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrnsRow {
    pub replicate: usize,
    pub seed: u64,
    pub method: String,
    /// Mean of the per-trajectory averages; `None` if no trajectory completed.
    pub estimate: Option<f64>,
    pub trajectories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrnsMethodSummary {
    pub summary: ReplicateSummary,
    pub mean_trajectories: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrnsSweepOutput {
    pub ground_truth: f64,
    pub ground_truth_se: f64,
    pub min_propensity: f64,
    pub summaries: Vec<DrnsMethodSummary>,
    pub rows: Vec<DrnsRow>,
}

impl DrnsSweepOutput {
    pub fn summary(&self, method: &str) -> Option<&ReplicateSummary> {
        self.summaries
            .iter()
            .map(|s| &s.summary)
            .find(|s| s.method == method)
    }
}

/// Average per-round loss of the target over `T` rounds on shuffles of the
/// fully labeled evaluation set, and its standard error over simulations.
pub fn simulate_ground_truth(
    policy: &EpsilonGreedyPolicy,
    data: &MultilabelDataset,
    horizon: usize,
    sims: usize,
    seed: u64,
    workers: usize,
) -> Result<(f64, f64)> {
    if data.len() < horizon {
        return Err(Error::validation(format!(
            "validation set has {} examples, fewer than T = {horizon}",
            data.len()
        )));
    }
    let values = run_replicates(sims, workers, |s| {
        let mut rng = seeded(derive_seed(seed, streams::GROUND_TRUTH, s as u64));
        let order = permutation(&mut rng, data.len());
        let mut state = policy.initial_state();
        let mut total = 0.0;
        for &i in &order[..horizon] {
            let (x, y) = &data.examples[i];
            let a = categorical(&mut rng, &policy.distribution(x, &state));
            let loss = f64::from(u8::from(!y.contains(&a)));
            total += loss;
            policy.observe(&mut state, x, a, loss);
        }
        Ok(total / horizon as f64)
    })?;
    Ok((mean(&values), std_error(&values)))
}

/// Consecutive trajectories over one stream until it runs out.
fn trajectory_values(
    events: &[LogEvent],
    seed: u64,
    run: impl Fn(&[LogEvent], u64) -> Result<DrnsResult>,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut offset = 0;
    while offset < events.len() {
        let r = run(
            &events[offset..],
            derive_seed(seed, streams::EVALUATOR, out.len() as u64),
        )?;
        if !r.success {
            break;
        }
        offset += r.events_consumed;
        out.push(r.v_avg);
    }
    Ok(out)
}

fn fit_loss_model(init: &MultilabelDataset, options: LogisticOptions) -> LogisticLossModel {
    let dim = init
        .examples
        .iter()
        .map(|(x, _)| x.dim())
        .max()
        .unwrap_or(0);
    let mut heads = LinearModel::zeros(ModelKind::Logistic, init.k, dim);
    for a in 0..init.k {
        let data: Vec<_> = init
            .examples
            .iter()
            .map(|(x, y)| (x.clone(), y.contains(&a)))
            .collect();
        let h = logistic_fit(&data, dim, options);
        heads.weights[a] = h.weights[0].clone();
        heads.intercepts[a] = h.intercepts[0];
    }
    LogisticLossModel { heads }
}

pub fn run_drns_sweep(
    data: &MultilabelDataset,
    config: &DrnsSweepConfig,
    replicates: usize,
    seed: u64,
    workers: usize,
) -> Result<DrnsSweepOutput> {
    config.validate()?;
    if replicates == 0 {
        return Err(Error::validation("replicates must be at least 1"));
    }
    let parts = split_indices(
        data.len(),
        &[config.init_fraction],
        derive_seed(seed, streams::SPLIT, 0),
    );
    let (init, eval) = (data.subset(&parts[0]), data.subset(&parts[1]));
    if init.is_empty() || eval.is_empty() {
        return Err(Error::validation(
            "split left an empty initialization or evaluation set",
        ));
    }
    let loss_model = fit_loss_model(&init, config.logistic);
    let policy = EpsilonGreedyPolicy::new(
        &init.examples,
        data.k,
        config.epsilon,
        config.retrain_period,
        config.logistic,
    )?;
    let (ground_truth, ground_truth_se) = simulate_ground_truth(
        &policy,
        &eval,
        config.horizon,
        config.ground_truth_sims,
        seed,
        workers,
    )?;
    let methods = config.methods();
    let t = config.horizon;
    let per_rep = run_replicates(replicates, workers, |r| {
        let rep_seed = derive_seed(seed, streams::PERMUTE, r as u64);
        let order = permutation(&mut seeded(rep_seed), eval.len());
        let events = multilabel_biased_logger(
            &eval.subset(&order),
            derive_seed(rep_seed, streams::LOGGER, 0),
        )?;
        let c_min = min_logger_probability(&events).expect("logged events carry their payload");
        methods
            .iter()
            .map(|m| {
                let values = match *m {
                    SweepMethod::Dm => trajectory_values(&events, rep_seed, |ev, s| {
                        dm_ns_run(
                            ev,
                            &policy,
                            &loss_model,
                            MultiplierRule::Quantile {
                                rho: 0.0,
                                c_max: config.c_max,
                            },
                            t,
                            s,
                        )
                    })?,
                    SweepMethod::Rs => trajectory_values(&events, rep_seed, |ev, s| {
                        rs_run(ev, &policy, c_min, t, s)
                    })?,
                    SweepMethod::Wc => trajectory_values(&events, rep_seed, |ev, s| {
                        wc_run(ev, &policy, &loss_model, c_min, t, s)
                    })?,
                    SweepMethod::Drns { rho } => trajectory_values(&events, rep_seed, |ev, s| {
                        drns_run_rule(
                            ev,
                            &policy,
                            &loss_model,
                            MultiplierRule::Quantile {
                                rho,
                                c_max: config.c_max,
                            },
                            t,
                            s,
                        )
                    })?,
                };
                Ok(DrnsRow {
                    replicate: r,
                    seed: rep_seed,
                    method: m.name(),
                    estimate: (!values.is_empty()).then(|| mean(&values)),
                    trajectories: values.len(),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(|rows| (rows, c_min))
    })?;
    let min_propensity = per_rep
        .iter()
        .map(|(_, c)| *c)
        .fold(f64::INFINITY, f64::min);
    let rows: Vec<DrnsRow> = per_rep.into_iter().flat_map(|(rows, _)| rows).collect();
    let summaries = methods
        .iter()
        .map(|m| {
            let name = m.name();
            let mine: Vec<&DrnsRow> = rows.iter().filter(|r| r.method == name).collect();
            let est: Vec<f64> = mine.iter().filter_map(|r| r.estimate).collect();
            let failures = mine.len() - est.len();
            DrnsMethodSummary {
                summary: ReplicateSummary::new(name, ground_truth, &est, failures),
                mean_trajectories: mine.iter().map(|r| r.trajectories as f64).sum::<f64>()
                    / mine.len() as f64,
            }
        })
        .collect();
    Ok(DrnsSweepOutput {
        ground_truth,
        ground_truth_se,
        min_propensity,
        summaries,
        rows,
    })
}
