//! The logged-data model: sparse covariates, contexts and exploration events.
//!
//! A [`Context`] carries the visible covariates plus an optional hidden
//! payload (correct label set and per-action scores) that only data
//! generators and exploration policies may read. Target policies and reward
//! models are handed a [`SparseVec`] and never see the payload.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse feature vector with strictly increasing indices and finite values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVec {
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::validation(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation(
                "feature indices must be strictly increasing",
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite feature value {v}")));
        }
        Ok(Self { indices, values })
    }

    /// Builds a vector from unordered pairs; duplicate indices are rejected.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Result<Self> {
        pairs.sort_by_key(|p| p.0);
        let (indices, values) = pairs.into_iter().unzip();
        Self::new(indices, values)
    }

    /// Dense slice to sparse form, dropping exact zeros.
    pub fn from_dense(dense: &[f64]) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                indices.push(i as u32);
                values.push(v);
            }
        }
        Self { indices, values }
    }

    pub fn one_hot(index: u32) -> Self {
        Self {
            indices: vec![index],
            values: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// One past the largest index, i.e. the smallest dense dimension that holds it.
    pub fn dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    /// Dot product with a dense weight vector; indices past its end count as zero.
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter()
            .filter_map(|(i, v)| dense.get(i as usize).map(|w| w * v))
            .sum()
    }

    /// `dense += scale * self`, growing nothing: out-of-range indices are ignored.
    pub fn axpy_into(&self, scale: f64, dense: &mut [f64]) {
        for (i, v) in self.iter() {
            if let Some(slot) = dense.get_mut(i as usize) {
                *slot += scale * v;
            }
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        self.axpy_into(1.0, &mut out);
        out
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

impl Serialize for SparseVec {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.len()))?;
        for (i, v) in self.iter() {
            map.serialize_entry(&i.to_string(), &v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for SparseVec {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = std::collections::BTreeMap::<String, f64>::deserialize(deserializer)?;
        let mut pairs = Vec::with_capacity(raw.len());
        for (k, v) in raw {
            let idx: u32 = k.parse().map_err(|_| {
                D::Error::custom(format!("feature key {k:?} is not a non-negative integer"))
            })?;
            pairs.push((idx, v));
        }
        SparseVec::from_pairs(pairs).map_err(D::Error::custom)
    }
}

/// Information visible to data generators and exploration policies only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenPayload {
    /// Correct label set `Y`.
    #[serde(rename = "y")]
    pub labels: Vec<usize>,
    /// Per-action random scores used by the biased multilabel logger.
    #[serde(rename = "s", default, skip_serializing_if = "Vec::is_empty")]
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    features: SparseVec,
    hidden: Option<HiddenPayload>,
}

impl Context {
    pub fn new(features: SparseVec) -> Self {
        Self {
            features,
            hidden: None,
        }
    }

    pub fn with_hidden(features: SparseVec, hidden: HiddenPayload) -> Self {
        Self {
            features,
            hidden: Some(hidden),
        }
    }

    pub fn features(&self) -> &SparseVec {
        &self.features
    }

    pub fn hidden(&self) -> Option<&HiddenPayload> {
        self.hidden.as_ref()
    }
}

/// Whether the stored outcome is a loss or a reward. Estimators ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeMode {
    Loss,
    #[default]
    Reward,
}

/// One exploration record `(x_k, a_k, r_k, p_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEvent {
    pub context: Context,
    pub action: usize,
    pub outcome: f64,
    pub propensity: f64,
}

impl LogEvent {
    pub fn new(context: Context, action: usize, outcome: f64, propensity: f64) -> Result<Self> {
        let ev = Self {
            context,
            action,
            outcome,
            propensity,
        };
        ev.validate(None)?;
        Ok(ev)
    }

    pub fn features(&self) -> &SparseVec {
        self.context.features()
    }

    pub fn validate(&self, num_actions: Option<usize>) -> Result<()> {
        if !(0.0..=1.0).contains(&self.outcome) {
            return Err(Error::validation(format!(
                "outcome {} outside [0,1]",
                self.outcome
            )));
        }
        if !(self.propensity > 0.0 && self.propensity <= 1.0) {
            return Err(Error::validation(format!(
                "propensity {} outside (0,1]",
                self.propensity
            )));
        }
        if let Some(k) = num_actions {
            if self.action >= k {
                return Err(Error::validation(format!(
                    "action {} out of range for K={k}",
                    self.action
                )));
            }
        }
        Ok(())
    }
}
