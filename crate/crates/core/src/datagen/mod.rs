//! Data constructions for the benchmarks.
//!
//! Full-information datasets are turned into exploration logs by hiding
//! every loss but the chosen action's: a uniform logger for multiclass data,
//! a logger biased toward correct answers for multilabel data, and a
//! reveal/conceal logger that induces covariate shift for regression data.

mod io;
mod shift;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::data::{Context, HiddenPayload, LogEvent, SparseVec};
use crate::error::{Error, Result};
use crate::rng::{categorical, seeded};

pub use crate::dgp::{make_discrete_dgp, sample_log, DgpSpec};
pub use io::{
    parse_multiclass_csv, parse_multilabel_sparse, parse_regression_csv, read_multiclass_csv,
    read_multilabel_sparse, read_regression_csv, render_multiclass_csv, render_multilabel_sparse,
    render_regression_csv, BUNDLED_MULTICLASS,
};
pub use shift::{covariate_shift_transform, normal_pdf, CovariateShift};
pub use synthetic::{
    synthetic_multiclass, synthetic_multilabel, synthetic_regression, MulticlassSpec,
    MultilabelSpec, RegressionSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassDataset {
    #[serde(rename = "K")]
    pub k: usize,
    pub examples: Vec<(SparseVec, usize)>,
}

impl MulticlassDataset {
    pub fn new(k: usize, examples: Vec<(SparseVec, usize)>) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::validation("multiclass dataset is empty"));
        }
        if k == 0 {
            return Err(Error::validation("need K >= 1"));
        }
        if let Some((i, (_, y))) = examples.iter().enumerate().find(|(_, (_, y))| *y >= k) {
            return Err(Error::validation(format!(
                "example {i}: label {y} out of range for K={k}"
            )));
        }
        Ok(Self { k, examples })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.examples
            .iter()
            .map(|(x, _)| x.dim())
            .max()
            .unwrap_or(0)
    }

    /// Examples at the given positions, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            k: self.k,
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }

    /// Error rate of a classifier.
    pub fn error_rate(&self, predict: impl Fn(&SparseVec) -> usize) -> f64 {
        let wrong = self
            .examples
            .iter()
            .filter(|(x, y)| predict(x) != *y)
            .count();
        wrong as f64 / self.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilabelDataset {
    #[serde(rename = "K")]
    pub k: usize,
    pub examples: Vec<(SparseVec, Vec<usize>)>,
}

impl MultilabelDataset {
    /// Label sets are sorted and deduplicated; empty sets are rejected.
    pub fn new(k: usize, mut examples: Vec<(SparseVec, Vec<usize>)>) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::validation("multilabel dataset is empty"));
        }
        for (i, (_, y)) in examples.iter_mut().enumerate() {
            y.sort_unstable();
            y.dedup();
            if y.is_empty() {
                return Err(Error::validation(format!(
                    "example {i} has an empty label set"
                )));
            }
            if let Some(a) = y.iter().find(|&&a| a >= k) {
                return Err(Error::validation(format!(
                    "example {i}: label {a} out of range for K={k}"
                )));
            }
        }
        Ok(Self { k, examples })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            k: self.k,
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }
}

/// Regression examples `(x, v)` with `v ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDataset {
    pub examples: Vec<(SparseVec, f64)>,
}

impl RegressionDataset {
    pub fn new(examples: Vec<(SparseVec, f64)>) -> Result<Self> {
        if let Some((i, (_, v))) = examples
            .iter()
            .enumerate()
            .find(|(_, (_, v))| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::validation(format!(
                "example {i}: response {v} must be finite and >= 0"
            )));
        }
        Ok(Self { examples })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Uniform exploration over `K` actions with loss `1[a ≠ y]` revealed for
/// the chosen action only. The true label rides along as hidden payload.
pub fn multiclass_to_bandit(dataset: &MulticlassDataset, seed: u64) -> Vec<LogEvent> {
    let mut rng = seeded(seed);
    let k = dataset.k;
    let p = 1.0 / k as f64;
    dataset
        .examples
        .iter()
        .map(|(x, y)| {
            let a = rand::Rng::random_range(&mut rng, 0..k);
            let ctx = Context::with_hidden(
                x.clone(),
                HiddenPayload {
                    labels: vec![*y],
                    scores: Vec::new(),
                },
            );
            LogEvent::new(ctx, a, f64::from(u8::from(a != *y)), p).expect("valid by construction")
        })
        .collect()
}

/// Exploration probabilities of the biased multilabel logger:
/// `0.3·s(a)/Σs + 0.7·1[a∈Y]/|Y|`.
pub fn biased_logger_probs(labels: &[usize], scores: &[f64]) -> Vec<f64> {
    let total: f64 = scores.iter().sum();
    let share = 0.7 / labels.len() as f64;
    scores
        .iter()
        .enumerate()
        .map(|(a, s)| 0.3 * s / total + if labels.contains(&a) { share } else { 0.0 })
        .collect()
}

/// Logs each example with the biased logger; loss is `1[a ∉ Y]` and the
/// hidden payload carries `(Y, s)`.
pub fn multilabel_biased_logger(dataset: &MultilabelDataset, seed: u64) -> Result<Vec<LogEvent>> {
    if dataset.k < 2 {
        return Err(Error::domain("the biased logger needs K >= 2"));
    }
    let mut rng = seeded(seed);
    Ok(dataset
        .examples
        .iter()
        .map(|(x, y)| {
            let s: Vec<f64> = (0..dataset.k)
                .map(|_| rand::Rng::random_range(&mut rng, 0.1..=1.0))
                .collect();
            let probs = biased_logger_probs(y, &s);
            let a = categorical(&mut rng, &probs);
            let ctx = Context::with_hidden(
                x.clone(),
                HiddenPayload {
                    labels: y.clone(),
                    scores: s,
                },
            );
            LogEvent::new(ctx, a, f64::from(u8::from(!y.contains(&a))), probs[a])
                .expect("valid by construction")
        })
        .collect())
}

/// Smallest exploration probability over every action of every logged
/// example, recomputed from the hidden payloads.
pub fn min_logger_probability(events: &[LogEvent]) -> Option<f64> {
    events
        .iter()
        .filter_map(|e| e.context.hidden())
        .flat_map(|h| biased_logger_probs(&h.labels, &h.scores))
        .min_by(f64::total_cmp)
}
