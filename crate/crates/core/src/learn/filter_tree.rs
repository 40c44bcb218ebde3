//! Filter Tree reduction from cost-sensitive multiclass to weighted binary
//! classification.
//!
//! Actions sit at the leaves of a balanced tournament padded to a power of
//! two (padding leaves are byes). Nodes are trained bottom-up: each node sees
//! the pair of actions its two subtrees actually send up for an example and
//! learns which of them is cheaper, weighted by the cost gap.

use crate::data::SparseVec;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, streams};

use super::CostMatrixExample;

#[derive(Debug, Clone, Copy)]
pub struct WeightedExample<'a> {
    pub features: &'a SparseVec,
    pub label: bool,
    pub weight: f64,
}

pub trait BinaryClassifier: Send + Sync {
    fn predict(&self, x: &SparseVec) -> bool;
}

pub trait BinaryLearner: Sync {
    fn train(&self, examples: &[WeightedExample<'_>], seed: u64) -> Box<dyn BinaryClassifier>;
}

struct Constant(bool);

impl BinaryClassifier for Constant {
    fn predict(&self, _x: &SparseVec) -> bool {
        self.0
    }
}

/// `label = (x_f > threshold) == positive`; with no feature it is the
/// constant `!positive`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionStump {
    pub feature: Option<u32>,
    pub threshold: f64,
    pub positive: bool,
}

impl BinaryClassifier for DecisionStump {
    fn predict(&self, x: &SparseVec) -> bool {
        match self.feature {
            Some(f) => (x.get(f) > self.threshold) == self.positive,
            None => !self.positive,
        }
    }
}

impl DecisionStump {
    /// Exhaustive search over features, thresholds between distinct values,
    /// and both polarities. Ties keep the first candidate found.
    pub fn fit(examples: &[WeightedExample<'_>]) -> (Self, f64) {
        let total: f64 = examples.iter().map(|e| e.weight).sum();
        let pos: f64 = examples.iter().filter(|e| e.label).map(|e| e.weight).sum();
        // constant stumps: predict all-true costs (total − pos), all-false costs pos
        let mut best = if pos >= total - pos {
            (
                Self {
                    feature: None,
                    threshold: 0.0,
                    positive: false,
                },
                total - pos,
            )
        } else {
            (
                Self {
                    feature: None,
                    threshold: 0.0,
                    positive: true,
                },
                pos,
            )
        };
        let mut features: Vec<u32> = examples
            .iter()
            .flat_map(|e| e.features.indices().iter().copied())
            .collect();
        features.sort_unstable();
        features.dedup();
        let mut column: Vec<(f64, bool, f64)> = Vec::with_capacity(examples.len());
        for f in features {
            column.clear();
            column.extend(
                examples
                    .iter()
                    .map(|e| (e.features.get(f), e.label, e.weight)),
            );
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            // split after position j: items 0..=j fall at or below the threshold
            let mut low_pos = 0.0;
            let mut low_total = 0.0;
            for j in 0..column.len().saturating_sub(1) {
                low_pos += if column[j].1 { column[j].2 } else { 0.0 };
                low_total += column[j].2;
                if column[j].0 == column[j + 1].0 {
                    continue;
                }
                let threshold = 0.5 * (column[j].0 + column[j + 1].0);
                // positive polarity: above → true
                let err_pos = low_pos + ((total - low_total) - (pos - low_pos));
                let err_neg = total - err_pos;
                for (err, positive) in [(err_pos, true), (err_neg, false)] {
                    if err < best.1 {
                        best = (
                            Self {
                                feature: Some(f),
                                threshold,
                                positive,
                            },
                            err,
                        );
                    }
                }
            }
        }
        best
    }
}

/// Base learner producing [`DecisionStump`]s.
#[derive(Debug, Clone, Copy, Default)]
pub struct StumpLearner;

impl BinaryLearner for StumpLearner {
    fn train(&self, examples: &[WeightedExample<'_>], _seed: u64) -> Box<dyn BinaryClassifier> {
        Box::new(DecisionStump::fit(examples).0)
    }
}

pub struct FilterTree {
    k: usize,
    leaves: usize,
    /// Heap-indexed internal nodes `1..leaves`; `None` for byes.
    nodes: Vec<Option<Box<dyn BinaryClassifier>>>,
}

impl std::fmt::Debug for FilterTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FilterTree")
            .field("k", &self.k)
            .field("classifiers", &self.num_classifiers())
            .finish()
    }
}

impl FilterTree {
    pub fn num_actions(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.leaves.trailing_zeros() as usize
    }

    /// Number of nodes holding a trained classifier (always `K − 1`).
    pub fn num_classifiers(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_some()).count()
    }

    /// Predicted action and the number of tree levels visited.
    pub fn predict_with_path(&self, x: &SparseVec) -> (usize, usize) {
        let mut i = 1;
        let mut steps = 0;
        while i < self.leaves {
            let right = match &self.nodes[i] {
                Some(c) => c.predict(x),
                None => false,
            };
            i = 2 * i + usize::from(right);
            steps += 1;
        }
        (i - self.leaves, steps)
    }

    pub fn predict(&self, x: &SparseVec) -> usize {
        self.predict_with_path(x).0
    }
}

/// Trains a Filter Tree bottom-up with the given base learner.
pub fn filter_tree_train(
    examples: &[CostMatrixExample],
    learner: &dyn BinaryLearner,
    seed: u64,
) -> Result<FilterTree> {
    let Some(first) = examples.first() else {
        return Err(Error::domain("filter tree needs at least one example"));
    };
    let k = first.num_actions();
    if k < 2 {
        return Err(Error::domain("filter tree needs at least two actions"));
    }
    if examples.iter().any(|e| e.num_actions() != k) {
        return Err(Error::validation("cost vectors have differing lengths"));
    }
    let leaves = k.next_power_of_two();
    let mut nodes: Vec<Option<Box<dyn BinaryClassifier>>> = (0..leaves).map(|_| None).collect();
    // winners[i] = action each example carries out of node i (None for empty subtrees)
    let mut winners: Vec<Option<Vec<usize>>> = vec![None; 2 * leaves];
    for a in 0..k {
        winners[leaves + a] = Some(vec![a; examples.len()]);
    }
    for i in (1..leaves).rev() {
        winners[i] = match (winners[2 * i].take(), winners[2 * i + 1].take()) {
            (None, None) => None,
            (Some(w), None) | (None, Some(w)) => Some(w),
            (Some(left), Some(right)) => {
                let train: Vec<WeightedExample<'_>> = examples
                    .iter()
                    .zip(left.iter().zip(&right))
                    .filter_map(|(e, (&l, &r))| {
                        let gap = e.costs[l] - e.costs[r];
                        (gap != 0.0).then_some(WeightedExample {
                            features: &e.features,
                            label: gap > 0.0,
                            weight: gap.abs(),
                        })
                    })
                    .collect();
                let clf: Box<dyn BinaryClassifier> = if train.is_empty() {
                    Box::new(Constant(false))
                } else {
                    learner.train(&train, derive_seed(seed, streams::MODEL, i as u64))
                };
                let out = examples
                    .iter()
                    .zip(left.iter().zip(&right))
                    .map(|(e, (&l, &r))| if clf.predict(&e.features) { r } else { l })
                    .collect();
                nodes[i] = Some(clf);
                Some(out)
            }
        };
    }
    Ok(FilterTree { k, leaves, nodes })
}
