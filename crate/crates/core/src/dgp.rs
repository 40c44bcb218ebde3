//! Fully enumerable data-generating processes.
//!
//! A [`DiscreteDgp`] has a finite context set with an explicit distribution
//! `D(x)`, a finite-support reward law `D(r|x,a)` per pair, and a stationary
//! exploration table `μ(a|x)`. Context `x` is presented to policies and models
//! as the one-hot vector `e_x`, so table-backed policies ([`TablePolicy`],
//! [`TableReward`], [`TablePropensity`]) can recover the row index.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Context, LogEvent, SparseVec};
use crate::error::{Error, Result};
use crate::policy::{PropensityModel, RewardModel, StationaryPolicy};
use crate::rng::{categorical, seeded};

const ROW_TOL: f64 = 1e-12;

pub const MAX_CONTEXTS: usize = 16;
pub const MAX_ACTIONS: usize = 8;
pub const MAX_SUPPORT: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardLaw {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl RewardLaw {
    pub fn deterministic(value: f64) -> Self {
        Self {
            values: vec![value],
            probs: vec![1.0],
        }
    }

    pub fn bernoulli(p: f64) -> Self {
        Self {
            values: vec![0.0, 1.0],
            probs: vec![1.0 - p, p],
        }
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| v * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| p * (v - m) * (v - m))
            .sum()
    }

    /// `E[(r − c)²]`.
    pub fn mean_sq_error(&self, c: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| p * (v - c) * (v - c))
            .sum()
    }
}

fn check_row(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::validation(format!(
            "{what} has invalid entries {row:?}"
        )));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > ROW_TOL {
        return Err(Error::validation(format!("{what} sums to {total}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDgp {
    context_probs: Vec<f64>,
    rewards: Vec<Vec<RewardLaw>>,
    exploration: Vec<Vec<f64>>,
}

impl DiscreteDgp {
    pub fn new(
        context_probs: Vec<f64>,
        rewards: Vec<Vec<RewardLaw>>,
        exploration: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let nx = context_probs.len();
        if nx == 0 {
            return Err(Error::validation("DGP needs at least one context"));
        }
        check_row(&context_probs, "context distribution")?;
        if rewards.len() != nx || exploration.len() != nx {
            return Err(Error::validation("table row counts disagree"));
        }
        let k = exploration[0].len();
        if k == 0 {
            return Err(Error::validation("DGP needs at least one action"));
        }
        for x in 0..nx {
            if exploration[x].len() != k || rewards[x].len() != k {
                return Err(Error::validation(format!(
                    "context {x}: ragged action tables"
                )));
            }
            check_row(&exploration[x], &format!("exploration row {x}"))?;
            if exploration[x].iter().any(|&p| p <= 0.0) {
                return Err(Error::validation(format!(
                    "exploration row {x} must be strictly positive"
                )));
            }
            for (a, law) in rewards[x].iter().enumerate() {
                if law.values.len() != law.probs.len() || law.values.is_empty() {
                    return Err(Error::validation(format!("reward law ({x},{a}) malformed")));
                }
                check_row(&law.probs, &format!("reward law ({x},{a})"))?;
                if law.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::validation(format!(
                        "reward law ({x},{a}) support leaves [0,1]"
                    )));
                }
            }
        }
        Ok(Self {
            context_probs,
            rewards,
            exploration,
        })
    }

    pub fn num_contexts(&self) -> usize {
        self.context_probs.len()
    }

    pub fn num_actions(&self) -> usize {
        self.exploration[0].len()
    }

    pub fn context_probs(&self) -> &[f64] {
        &self.context_probs
    }

    pub fn context_prob(&self, x: usize) -> f64 {
        self.context_probs[x]
    }

    pub fn exploration(&self) -> &[Vec<f64>] {
        &self.exploration
    }

    pub fn mu(&self, x: usize, a: usize) -> f64 {
        self.exploration[x][a]
    }

    pub fn reward_law(&self, x: usize, a: usize) -> &RewardLaw {
        &self.rewards[x][a]
    }

    /// `r*(x,a) = E[r|x,a]`.
    pub fn r_star(&self, x: usize, a: usize) -> f64 {
        self.rewards[x][a].mean()
    }

    pub fn r_star_table(&self) -> Vec<Vec<f64>> {
        (0..self.num_contexts())
            .map(|x| (0..self.num_actions()).map(|a| self.r_star(x, a)).collect())
            .collect()
    }

    pub fn reward_variance(&self, x: usize, a: usize) -> f64 {
        self.rewards[x][a].variance()
    }

    pub fn with_exploration(&self, exploration: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            self.context_probs.clone(),
            self.rewards.clone(),
            exploration,
        )
    }

    pub fn context_features(x: usize) -> SparseVec {
        SparseVec::one_hot(x as u32)
    }

    /// Inverse of [`context_features`](Self::context_features).
    pub fn context_index(features: &SparseVec) -> Option<usize> {
        match (features.indices(), features.values()) {
            ([i], [v]) if *v == 1.0 => Some(*i as usize),
            _ => None,
        }
    }

    /// Table of a stationary policy evaluated on every context.
    pub fn policy_table(&self, policy: &dyn StationaryPolicy) -> Vec<Vec<f64>> {
        (0..self.num_contexts())
            .map(|x| policy.distribution(&Self::context_features(x)))
            .collect()
    }

    /// Draws one `(x, a, r, p)` event under the exploration table.
    pub fn sample_event<R: Rng + ?Sized>(&self, rng: &mut R) -> LogEvent {
        let x = categorical(rng, &self.context_probs);
        let a = categorical(rng, &self.exploration[x]);
        let law = &self.rewards[x][a];
        let r = law.values[categorical(rng, &law.probs)];
        LogEvent {
            context: Context::new(Self::context_features(x)),
            action: a,
            outcome: r,
            propensity: self.exploration[x][a],
        }
    }
}

/// `V(ν)` by exact summation over contexts, actions and reward support.
pub fn policy_value_exact(dgp: &DiscreteDgp, policy: &dyn StationaryPolicy) -> f64 {
    let mut total = 0.0;
    for x in 0..dgp.num_contexts() {
        let dist = policy.distribution(&DiscreteDgp::context_features(x));
        for (a, &p) in dist.iter().enumerate() {
            let law = dgp.reward_law(x, a);
            for (v, q) in law.values.iter().zip(&law.probs) {
                total += dgp.context_prob(x) * p * q * v;
            }
        }
    }
    total
}

/// Value of a tabulated policy `table[x][a]`.
pub fn table_value(dgp: &DiscreteDgp, table: &[Vec<f64>]) -> f64 {
    policy_value_exact(dgp, &TablePolicy::new(table.to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpSpec {
    pub contexts: usize,
    pub actions: usize,
    pub support: usize,
    pub deterministic_rewards: bool,
    pub seed: u64,
}

impl Default for DgpSpec {
    fn default() -> Self {
        Self {
            contexts: 4,
            actions: 3,
            support: 2,
            deterministic_rewards: false,
            seed: 0,
        }
    }
}

fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(floor..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

/// Random DGP within the enumerability limits.
pub fn make_discrete_dgp(spec: &DgpSpec) -> Result<DiscreteDgp> {
    let support = if spec.deterministic_rewards {
        1
    } else {
        spec.support
    };
    if spec.contexts == 0 || spec.actions == 0 || support == 0 {
        return Err(Error::domain(
            "contexts, actions and reward support must be positive",
        ));
    }
    for (what, got, max) in [
        ("contexts", spec.contexts, MAX_CONTEXTS),
        ("actions", spec.actions, MAX_ACTIONS),
        ("reward support", support, MAX_SUPPORT),
    ] {
        if got > max {
            return Err(Error::Capacity(format!(
                "{what} {got} exceeds the enumeration limit of {max}"
            )));
        }
    }
    let mut rng = seeded(spec.seed);
    let context_probs = random_simplex(&mut rng, spec.contexts, 0.2);
    let exploration = (0..spec.contexts)
        .map(|_| random_simplex(&mut rng, spec.actions, 0.2))
        .collect();
    let rewards = (0..spec.contexts)
        .map(|_| {
            (0..spec.actions)
                .map(|_| RewardLaw {
                    values: (0..support).map(|_| rng.random::<f64>()).collect(),
                    probs: random_simplex(&mut rng, support, 0.2),
                })
                .collect()
        })
        .collect();
    DiscreteDgp::new(context_probs, rewards, exploration)
}

/// `n` IID events with exact recorded propensities.
pub fn sample_log(dgp: &DiscreteDgp, n: usize, seed: u64) -> Vec<LogEvent> {
    let mut rng = seeded(seed);
    (0..n).map(|_| dgp.sample_event(&mut rng)).collect()
}

fn row_of(features: &SparseVec) -> usize {
    DiscreteDgp::context_index(features)
        .unwrap_or_else(|| panic!("not a DGP context: {features:?}"))
}

/// Stationary policy given row-wise on DGP contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct TablePolicy {
    rows: Vec<Vec<f64>>,
}

impl TablePolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn deterministic(actions: &[usize], k: usize) -> Self {
        Self::new(
            actions
                .iter()
                .map(|&a| crate::policy::point_mass(k, a))
                .collect(),
        )
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn prob(&self, x: usize, a: usize) -> f64 {
        self.rows[x][a]
    }

    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().all(|row| {
            row.iter().filter(|&&p| (p - 1.0).abs() <= 1e-12).count() == 1
                && row.iter().filter(|&&p| p.abs() > 1e-12).count() == 1
        })
    }
}

impl StationaryPolicy for TablePolicy {
    fn num_actions(&self) -> usize {
        self.rows[0].len()
    }

    fn distribution(&self, x: &SparseVec) -> Vec<f64> {
        self.rows[row_of(x)].clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableReward {
    table: Vec<Vec<f64>>,
}

impl TableReward {
    pub fn new(table: Vec<Vec<f64>>) -> Self {
        Self { table }
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }
}

impl RewardModel for TableReward {
    fn predict(&self, x: &SparseVec, action: usize) -> f64 {
        self.table[row_of(x)][action].clamp(0.0, 1.0)
    }
}

/// Propensity estimate `μ̂(a|x)` given as a table; entries may be `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct TablePropensity {
    table: Vec<Vec<f64>>,
}

impl TablePropensity {
    pub fn new(table: Vec<Vec<f64>>) -> Self {
        Self { table }
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }
}

impl PropensityModel for TablePropensity {
    fn estimate(&self, event: &LogEvent, _k: usize) -> f64 {
        self.table[row_of(event.features())][event.action]
    }
}
