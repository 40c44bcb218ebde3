//! Covariate-shift estimation of a population mean: subsample, log with the
//! shifted reveal policy, and estimate the mean response by IPS and DR.

use serde::{Deserialize, Serialize};

use super::{run_replicates, ReplicateSummary};
use crate::data::SparseVec;
use crate::datagen::{CovariateShift, RegressionDataset};
use crate::error::{Error, Result};
use crate::estimators::{dr_estimate, ips_estimate};
use crate::learn::{ridge_fit, LinearModel, ModelKind};
use crate::policy::{clamp01, point_mass, FnPolicy, LoggedPropensity, RewardModel};
use crate::rng::{derive_seed, permutation, seeded, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftConfig {
    pub fractions: Vec<f64>,
    pub lambda: f64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            fractions: vec![0.002, 0.005, 0.01, 0.02, 0.05, 0.1],
            lambda: 1.0,
        }
    }
}

impl ShiftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() {
            return Err(Error::validation("need at least one subsample fraction"));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(Error::validation(format!(
                "fractions must be in (0, 1], got {f}"
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::validation("lambda must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub fraction: f64,
    pub replicate: usize,
    pub seed: u64,
    pub ips: Option<f64>,
    pub dr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftOutput {
    pub ground_truth: f64,
    pub sampler: CovariateShift,
    pub rows: Vec<ShiftRow>,
    /// `(fraction, IPS summary, DR summary)`.
    pub summaries: Vec<(f64, ReplicateSummary, ReplicateSummary)>,
}

/// `r̂(x,1) = w·x + b` clamped, `r̂(x,0) = 0`.
struct RevealModel(LinearModel);

impl RewardModel for RevealModel {
    fn predict(&self, x: &SparseVec, action: usize) -> f64 {
        if action == 1 {
            clamp01(self.0.score(x, 0))
        } else {
            0.0
        }
    }
}

pub fn run_covariate_shift(
    data: &RegressionDataset,
    config: &ShiftConfig,
    replicates: usize,
    seed: u64,
    workers: usize,
) -> Result<ShiftOutput> {
    config.validate()?;
    if replicates == 0 {
        return Err(Error::validation("replicates must be at least 1"));
    }
    let sampler = CovariateShift::fit(data, derive_seed(seed, streams::MODEL, 0))?;
    let ground_truth = sampler.true_mean(data);
    let always_reveal = FnPolicy::new(2, |_x: &SparseVec| point_mass(2, 1));
    let n = data.len();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (fi, &f) in config.fractions.iter().enumerate() {
        let size = ((f * n as f64).round() as usize).max(1);
        let per_rep = run_replicates(replicates, workers, |r| {
            let rep_seed = derive_seed(seed, streams::SUBSAMPLE, (fi * replicates + r) as u64);
            let mut rng = seeded(rep_seed);
            let perm = permutation(&mut rng, n);
            // a disjoint subsample of the same size (or what is left), logged
            // the same way, fits r̂
            let fit_events = sampler.log(data, &perm[size..(2 * size).min(n)], &mut rng);
            let events = sampler.log(data, &perm[..size], &mut rng);
            let mut row = ShiftRow {
                fraction: f,
                replicate: r,
                seed: rep_seed,
                ips: None,
                dr: None,
            };
            if events.iter().all(|e| e.action == 0) {
                return Ok(row);
            }
            let revealed: Vec<(SparseVec, f64)> = fit_events
                .iter()
                .filter(|e| e.action == 1)
                .map(|e| (e.features().clone(), e.outcome))
                .collect();
            let model = if revealed.is_empty() {
                LinearModel::zeros(ModelKind::Ridge, 1, 0)
            } else {
                ridge_fit(&revealed, config.lambda)?
            };
            let rm = RevealModel(model);
            row.ips = Some(ips_estimate(&events, &always_reveal, &LoggedPropensity)?.estimate);
            row.dr = Some(dr_estimate(&events, &always_reveal, &rm, &LoggedPropensity)?.estimate);
            Ok(row)
        })?;
        let ips: Vec<f64> = per_rep.iter().filter_map(|r| r.ips).collect();
        let dr: Vec<f64> = per_rep.iter().filter_map(|r| r.dr).collect();
        let skipped = replicates - ips.len();
        summaries.push((
            f,
            ReplicateSummary::new("IPS", ground_truth, &ips, skipped),
            ReplicateSummary::new("DR", ground_truth, &dr, skipped),
        ));
        rows.extend(per_rep);
    }
    Ok(ShiftOutput {
        ground_truth,
        sampler,
        rows,
        summaries,
    })
}
