//! Replicated experiment protocols and their summaries.
//!
//! Every protocol derives per-replicate seeds from one master seed with
//! [`derive_seed`](crate::rng::derive_seed), runs replicates on a worker pool,
//! and merges results by replicate index, so outputs do not depend on the
//! worker count.

mod config;
mod drns;
mod eval;
mod optimize;
mod report;
mod shift;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_std};

pub use config::{load_data, DataSource, ExperimentConfig, LoadedData, Mode};
pub use drns::{
    run_drns_sweep, simulate_ground_truth, DrnsSweepConfig, DrnsSweepOutput, SweepMethod,
};
pub use eval::{run_eval_stationary, EvalConfig, EvalOutput, LossModelKind};
pub use optimize::{
    run_optimize, ImputationMode, LearnerKind, OptimizeConfig, OptimizeOutput, OptimizeRow,
    OptimizeSummary,
};
pub use report::{
    config_hash, run_experiment, write_report, Manifest, RunOutput, Table, TableEntry,
};
pub use shift::{run_covariate_shift, ShiftConfig, ShiftOutput, ShiftRow};

/// Accuracy of one estimator across replicates against a fixed truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub method: String,
    pub ground_truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Sample standard deviation of the estimates.
    pub std: f64,
    /// Normal-approximation 95% half-width for `rmse`, via the delta method
    /// on the mean squared error.
    pub rmse_ci95: f64,
    pub replicates: usize,
    /// Replicates that produced no estimate.
    pub failures: usize,
}

impl ReplicateSummary {
    pub fn new(
        method: impl Into<String>,
        ground_truth: f64,
        estimates: &[f64],
        failures: usize,
    ) -> Self {
        let method = method.into();
        if estimates.is_empty() {
            return Self {
                method,
                ground_truth,
                mean_estimate: f64::NAN,
                bias: f64::NAN,
                rmse: f64::NAN,
                std: f64::NAN,
                rmse_ci95: f64::NAN,
                replicates: 0,
                failures,
            };
        }
        let m = mean(estimates);
        let sq: Vec<f64> = estimates
            .iter()
            .map(|e| (e - ground_truth) * (e - ground_truth))
            .collect();
        let mse = mean(&sq);
        let rmse = mse.sqrt();
        let r = estimates.len() as f64;
        let rmse_ci95 = if rmse > 0.0 && estimates.len() > 1 {
            1.96 * sample_std(&sq) / r.sqrt() / (2.0 * rmse)
        } else {
            0.0
        };
        Self {
            method,
            ground_truth,
            mean_estimate: m,
            bias: m - ground_truth,
            rmse,
            std: if estimates.len() > 1 {
                sample_std(estimates)
            } else {
                0.0
            },
            rmse_ci95,
            replicates: estimates.len(),
            failures,
        }
    }

    /// Standard error of the bias estimate.
    pub fn bias_std_error(&self) -> f64 {
        if self.replicates == 0 {
            f64::NAN
        } else {
            self.std / (self.replicates as f64).sqrt()
        }
    }

    /// `|bias| ≤ z·SE(bias)`.
    pub fn bias_within(&self, z: f64) -> bool {
        self.bias.abs() <= z * self.bias_std_error()
    }
}

/// Runs `f(0..count)` on up to `workers` threads, results in index order.
pub fn run_replicates<T, F>(count: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::validation(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}

/// One-sided sign test: `P(X ≥ wins)` for `X ~ Binomial(wins + losses, 1/2)`.
/// Ties are dropped by the caller.
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    let mut log_binom = vec![0.0f64; n + 1];
    for k in 1..=n {
        log_binom[k] = log_binom[k - 1] + ((n - k + 1) as f64).ln() - (k as f64).ln();
    }
    let half = -(n as f64) * std::f64::consts::LN_2;
    (wins..=n)
        .map(|k| (log_binom[k] + half).exp())
        .sum::<f64>()
        .min(1.0)
}

/// Splits `0..n` after a seeded shuffle into consecutive parts of the given
/// fractions; the last part takes the remainder.
pub fn split_indices(n: usize, fractions: &[f64], seed: u64) -> Vec<Vec<usize>> {
    let perm = crate::rng::permutation(&mut crate::rng::seeded(seed), n);
    let mut out = Vec::with_capacity(fractions.len() + 1);
    let mut start = 0;
    for f in fractions {
        let end = (start + (f * n as f64).round() as usize).min(n);
        out.push(perm[start..end].to_vec());
        start = end;
    }
    out.push(perm[start..].to_vec());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_replicate_rmse_is_abs_bias() {
        let s = ReplicateSummary::new("IPS", 0.3, &[0.45], 0);
        assert!((s.rmse - s.bias.abs()).abs() < 1e-15);
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn rmse_decomposition() {
        let est = [0.1, 0.4, 0.35, 0.2, 0.5];
        let s = ReplicateSummary::new("DR", 0.25, &est, 0);
        let r = est.len() as f64;
        let rhs = s.bias * s.bias + s.std * s.std * (r - 1.0) / r;
        assert!((s.rmse * s.rmse - rhs).abs() <= 1e-9 * rhs);
    }

    #[test]
    fn sign_test_values() {
        assert!((sign_test_p(0, 0) - 1.0).abs() < 1e-12);
        assert!((sign_test_p(3, 0) - 0.125).abs() < 1e-12);
        assert!((sign_test_p(20, 10) - 0.04936857).abs() < 1e-7);
    }

    #[test]
    fn replicates_are_ordered_and_worker_independent() {
        let a = run_replicates(20, 1, |i| Ok(i * i)).unwrap();
        let b = run_replicates(20, 3, |i| Ok(i * i)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn splits_partition() {
        let parts = split_indices(10, &[0.3, 0.2], 4);
        assert_eq!(
            parts.iter().map(Vec::len).collect::<Vec<_>>(),
            vec![3, 2, 5]
        );
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }
}
