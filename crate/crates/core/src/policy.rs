//! Policy and model contracts.
//!
//! Target policies and reward models only ever receive the visible covariates
//! ([`SparseVec`]); propensity models receive the whole logged event because
//! the exploration policy may depend on the hidden payload.

use crate::data::{LogEvent, SparseVec};
use crate::error::{Error, Result};

/// Tolerance on `sum(distribution) == 1`.
pub const DISTRIBUTION_TOL: f64 = 1e-9;

/// A conditional distribution `ν(a|x)` over a fixed set of `K` actions.
pub trait StationaryPolicy: Sync {
    fn num_actions(&self) -> usize;
    fn distribution(&self, x: &SparseVec) -> Vec<f64>;
}

/// A history-dependent policy `π(a|x, h)`.
///
/// The policy value itself is immutable; all adaptation lives in `State`,
/// which only [`observe`](NonstationaryPolicy::observe) mutates. Replaying the
/// same observations from [`initial_state`](NonstationaryPolicy::initial_state)
/// reproduces the same distributions.
pub trait NonstationaryPolicy: Sync {
    type State: Clone + Send;

    fn num_actions(&self) -> usize;
    fn initial_state(&self) -> Self::State;
    fn distribution(&self, x: &SparseVec, state: &Self::State) -> Vec<f64>;
    fn observe(&self, state: &mut Self::State, x: &SparseVec, action: usize, outcome: f64);
}

/// Plug-in outcome model `r̂(x, a)`.
pub trait RewardModel: Sync {
    fn predict(&self, x: &SparseVec, action: usize) -> f64;

    /// `r̂(x, ν) = Σ_a ν(a|x) r̂(x, a)` with predictions clamped to `[0,1]`.
    fn policy_value(&self, x: &SparseVec, dist: &[f64]) -> f64 {
        dist.iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(a, &p)| p * clamp01(self.predict(x, a)))
            .sum()
    }
}

/// Estimate `μ̂_k(a_k|x_k)` for the logged pair of event `k`.
///
/// `f64::INFINITY` is a legal answer meaning "no importance correction".
pub trait PropensityModel: Sync {
    fn estimate(&self, event: &LogEvent, event_index: usize) -> f64;
}

pub fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Checks non-negativity and normalization of a policy output.
pub fn check_distribution(dist: &[f64]) -> Result<()> {
    if dist.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::validation(format!(
            "distribution has negative or non-finite entries: {dist:?}"
        )));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(Error::validation(format!(
            "distribution sums to {total}, not 1"
        )));
    }
    Ok(())
}

/// Lowest-index argmax; NaN scores never win.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] || scores[best].is_nan() {
            best = i;
        }
    }
    best
}

pub fn point_mass(k: usize, action: usize) -> Vec<f64> {
    let mut d = vec![0.0; k];
    d[action] = 1.0;
    d
}

#[derive(Debug, Clone, Copy)]
pub struct UniformPolicy {
    pub k: usize,
}

impl StationaryPolicy for UniformPolicy {
    fn num_actions(&self) -> usize {
        self.k
    }

    fn distribution(&self, _x: &SparseVec) -> Vec<f64> {
        vec![1.0 / self.k as f64; self.k]
    }
}

/// Deterministic policy given by an action-selecting closure.
pub struct DeterministicPolicy<F> {
    k: usize,
    choose: F,
}

impl<F> DeterministicPolicy<F>
where
    F: Fn(&SparseVec) -> usize + Sync,
{
    pub fn new(k: usize, choose: F) -> Self {
        Self { k, choose }
    }
}

impl<F> StationaryPolicy for DeterministicPolicy<F>
where
    F: Fn(&SparseVec) -> usize + Sync,
{
    fn num_actions(&self) -> usize {
        self.k
    }

    fn distribution(&self, x: &SparseVec) -> Vec<f64> {
        point_mass(self.k, (self.choose)(x))
    }
}

/// Randomized policy given by a closure returning the full distribution.
pub struct FnPolicy<F> {
    k: usize,
    dist: F,
}

impl<F> FnPolicy<F>
where
    F: Fn(&SparseVec) -> Vec<f64> + Sync,
{
    pub fn new(k: usize, dist: F) -> Self {
        Self { k, dist }
    }
}

impl<F> StationaryPolicy for FnPolicy<F>
where
    F: Fn(&SparseVec) -> Vec<f64> + Sync,
{
    fn num_actions(&self) -> usize {
        self.k
    }

    fn distribution(&self, x: &SparseVec) -> Vec<f64> {
        (self.dist)(x)
    }
}

/// A stationary policy seen as a nonstationary one with empty state.
pub struct Frozen<P>(pub P);

impl<P: StationaryPolicy> NonstationaryPolicy for Frozen<P> {
    type State = ();

    fn num_actions(&self) -> usize {
        self.0.num_actions()
    }

    fn initial_state(&self) {}

    fn distribution(&self, x: &SparseVec, _state: &()) -> Vec<f64> {
        self.0.distribution(x)
    }

    fn observe(&self, _state: &mut (), _x: &SparseVec, _action: usize, _outcome: f64) {}
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantReward(pub f64);

impl RewardModel for ConstantReward {
    fn predict(&self, _x: &SparseVec, _action: usize) -> f64 {
        clamp01(self.0)
    }
}

pub struct FnReward<F>(pub F);

impl<F> RewardModel for FnReward<F>
where
    F: Fn(&SparseVec, usize) -> f64 + Sync,
{
    fn predict(&self, x: &SparseVec, action: usize) -> f64 {
        clamp01((self.0)(x, action))
    }
}

/// Uses the recorded propensity `p_k` (perfect logging).
#[derive(Debug, Clone, Copy, Default)]
pub struct LoggedPropensity;

impl PropensityModel for LoggedPropensity {
    fn estimate(&self, event: &LogEvent, _k: usize) -> f64 {
        event.propensity
    }
}

/// `μ̂ ≡ +∞`: turns DR into the direct method.
#[derive(Debug, Clone, Copy, Default)]
pub struct InfinitePropensity;

impl PropensityModel for InfinitePropensity {
    fn estimate(&self, _event: &LogEvent, _k: usize) -> f64 {
        f64::INFINITY
    }
}

/// Inflated estimate `μ̂ = factor · p_k`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledPropensity(pub f64);

impl PropensityModel for ScaledPropensity {
    fn estimate(&self, event: &LogEvent, _k: usize) -> f64 {
        self.0 * event.propensity
    }
}

pub struct FnPropensity<F>(pub F);

impl<F> PropensityModel for FnPropensity<F>
where
    F: Fn(&LogEvent, usize) -> f64 + Sync,
{
    fn estimate(&self, event: &LogEvent, k: usize) -> f64 {
        (self.0)(event, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[0.3, 0.3]), 0);
        assert_eq!(argmax(&[f64::NAN, 0.0]), 1);
    }

    #[test]
    fn distribution_check() {
        assert!(check_distribution(&[0.25, 0.75]).is_ok());
        assert!(check_distribution(&[0.5, 0.6]).is_err());
        assert!(check_distribution(&[-0.1, 1.1]).is_err());
    }

    #[test]
    fn policy_value_clamps() {
        let m = FnReward(|_: &SparseVec, a: usize| if a == 0 { 2.0 } else { -1.0 });
        let x = SparseVec::default();
        assert_eq!(m.policy_value(&x, &[0.5, 0.5]), 0.5);
    }
}
