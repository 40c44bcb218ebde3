//! Stationary off-policy estimators.
//!
//! All three estimators share one per-event code path, [`dr_term`], and one
//! summation routine (compensated, in event order). The direct method is the
//! doubly robust term with `μ̂ = +∞` and IPS is the doubly robust term with
//! `r̂ ≡ 0`, so those special cases agree with DR bit for bit.

pub mod analysis;
pub mod bounds;

use serde::{Deserialize, Serialize};

use crate::data::LogEvent;
use crate::error::{Error, Result};
use crate::policy::{PropensityModel, RewardModel, StationaryPolicy};
use crate::stats::CompensatedSum;

pub use analysis::{
    dm_bias_exact, dm_variance_deterministic_target, dr_bias_exact,
    dr_variance_deterministic_target, ips_bias_exact, ips_variance_deterministic_target,
    max_weight, term_expectation_exact, term_variance_bound, term_variance_decomposition,
    term_variance_exact, ErrorDecomposition, VarianceDecomposition,
};
pub use bounds::{
    check_conjugate, conjugate, finite_sample_bound, finite_sample_bound_moments,
    freedman_half_width, term_range_bound, AssumptionBounds, MomentBounds,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Dm,
    Ips,
    Dr,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dm => "DM",
            Method::Ips => "IPS",
            Method::Dr => "DR",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One summand `V̂_k = baseline + correction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermValue {
    pub value: f64,
    pub importance_weight: f64,
    pub baseline: f64,
    pub correction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub estimate: f64,
    pub n: usize,
    #[serde(skip)]
    pub term_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_half_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EstimatorOptions {
    /// Cap on the importance weight `ν/μ̂`.
    pub clip: Option<f64>,
    pub retain_terms: bool,
}

impl EstimatorOptions {
    pub fn retaining_terms() -> Self {
        Self {
            clip: None,
            retain_terms: true,
        }
    }
}

fn weight(nu: f64, mu_hat: f64, clip: Option<f64>) -> f64 {
    let w = if mu_hat == f64::INFINITY {
        0.0
    } else {
        nu / mu_hat
    };
    match clip {
        Some(m) => w.min(m),
        None => w,
    }
}

fn check_mu_hat(mu_hat: f64, index: usize) -> Result<()> {
    if mu_hat.is_nan() || mu_hat <= 0.0 {
        return Err(Error::domain(format!(
            "propensity estimate {mu_hat} for event {index} is not positive"
        )));
    }
    Ok(())
}

/// The doubly robust term for one event given the target distribution at
/// its context and the propensity estimate of its logged action.
pub fn dr_term(
    event: &LogEvent,
    policy_dist: &[f64],
    reward_model: &dyn RewardModel,
    propensity_estimate: f64,
) -> TermValue {
    dr_term_clipped(event, policy_dist, reward_model, propensity_estimate, None)
}

fn dr_term_clipped(
    event: &LogEvent,
    policy_dist: &[f64],
    reward_model: &dyn RewardModel,
    mu_hat: f64,
    clip: Option<f64>,
) -> TermValue {
    let x = event.features();
    let baseline = reward_model.policy_value(x, policy_dist);
    let importance_weight = weight(policy_dist[event.action], mu_hat, clip);
    let correction = if mu_hat == f64::INFINITY {
        0.0
    } else {
        let residual =
            event.outcome - crate::policy::clamp01(reward_model.predict(x, event.action));
        importance_weight * residual
    };
    TermValue {
        value: baseline + correction,
        importance_weight,
        baseline,
        correction,
    }
}

fn finish(
    method: Method,
    terms: impl Iterator<Item = f64>,
    n: usize,
    retain: bool,
) -> EstimateReport {
    let mut acc = CompensatedSum::new();
    let mut kept = retain.then(|| Vec::with_capacity(n));
    for v in terms {
        acc.add(v);
        if let Some(k) = kept.as_mut() {
            k.push(v);
        }
    }
    EstimateReport {
        method,
        estimate: acc.total() / n as f64,
        n,
        term_values: kept,
        ci_half_width: None,
    }
}

fn nonempty(events: &[LogEvent]) -> Result<()> {
    if events.is_empty() {
        return Err(Error::domain("estimators need at least one event"));
    }
    Ok(())
}

pub fn dm_estimate(
    events: &[LogEvent],
    policy: &dyn StationaryPolicy,
    reward_model: &dyn RewardModel,
) -> Result<EstimateReport> {
    dm_estimate_with(events, policy, reward_model, &EstimatorOptions::default())
}

pub fn dm_estimate_with(
    events: &[LogEvent],
    policy: &dyn StationaryPolicy,
    reward_model: &dyn RewardModel,
    opts: &EstimatorOptions,
) -> Result<EstimateReport> {
    nonempty(events)?;
    let terms = events.iter().map(|ev| {
        let dist = policy.distribution(ev.features());
        reward_model.policy_value(ev.features(), &dist)
    });
    Ok(finish(Method::Dm, terms, events.len(), opts.retain_terms))
}

pub fn ips_estimate(
    events: &[LogEvent],
    policy: &dyn StationaryPolicy,
    propensity_model: &dyn PropensityModel,
) -> Result<EstimateReport> {
    ips_estimate_with(
        events,
        policy,
        propensity_model,
        &EstimatorOptions::default(),
    )
}

pub fn ips_estimate_with(
    events: &[LogEvent],
    policy: &dyn StationaryPolicy,
    propensity_model: &dyn PropensityModel,
    opts: &EstimatorOptions,
) -> Result<EstimateReport> {
    nonempty(events)?;
    let mut terms = Vec::with_capacity(events.len());
    for (k, ev) in events.iter().enumerate() {
        let mu_hat = propensity_model.estimate(ev, k);
        check_mu_hat(mu_hat, k)?;
        if mu_hat.is_infinite() {
            return Err(Error::domain(format!(
                "IPS needs a finite propensity estimate, event {k} has +inf"
            )));
        }
        let dist = policy.distribution(ev.features());
        terms.push(weight(dist[ev.action], mu_hat, opts.clip) * ev.outcome);
    }
    Ok(finish(
        Method::Ips,
        terms.into_iter(),
        events.len(),
        opts.retain_terms,
    ))
}

pub fn dr_estimate(
    events: &[LogEvent],
    policy: &dyn StationaryPolicy,
    reward_model: &dyn RewardModel,
    propensity_model: &dyn PropensityModel,
) -> Result<EstimateReport> {
    dr_estimate_with(
        events,
        policy,
        reward_model,
        propensity_model,
        &EstimatorOptions::default(),
    )
}

pub fn dr_estimate_with(
    events: &[LogEvent],
    policy: &dyn StationaryPolicy,
    reward_model: &dyn RewardModel,
    propensity_model: &dyn PropensityModel,
    opts: &EstimatorOptions,
) -> Result<EstimateReport> {
    nonempty(events)?;
    let mut terms = Vec::with_capacity(events.len());
    for (k, ev) in events.iter().enumerate() {
        let mu_hat = propensity_model.estimate(ev, k);
        check_mu_hat(mu_hat, k)?;
        let dist = policy.distribution(ev.features());
        terms.push(dr_term_clipped(ev, &dist, reward_model, mu_hat, opts.clip).value);
    }
    Ok(finish(
        Method::Dr,
        terms.into_iter(),
        events.len(),
        opts.retain_terms,
    ))
}

/// Dispatches on `method`; the unused model is ignored.
pub fn estimate(
    method: Method,
    events: &[LogEvent],
    policy: &dyn StationaryPolicy,
    reward_model: &dyn RewardModel,
    propensity_model: &dyn PropensityModel,
) -> Result<EstimateReport> {
    match method {
        Method::Dm => dm_estimate(events, policy, reward_model),
        Method::Ips => ips_estimate(events, policy, propensity_model),
        Method::Dr => dr_estimate(events, policy, reward_model, propensity_model),
    }
}
