//! Replay evaluation of history-dependent policies.
//!
//! [`drns_run`] simulates the target's interaction history by rejection
//! sampling over the exploration stream and, unlike plain replay, uses every
//! processed event through a doubly robust term weighted by the current
//! acceptance multiplier `c_t`. The multiplier tracks a low quantile of the
//! observed ratios `p_k/π_t(a_k|x_k)`, capped at `c_max`.
//!
//! Per event, in order: compute `V̂_k`, add `c_t·V̂_k` to the cumulative
//! estimate and `c_t` to the normalizer `C`, insert the ratio into `Q`, draw
//! `u`, and accept iff `u ≤ c_t·π_t/p_k`. An acceptance extends the target
//! history and, unless `T` steps are complete, resets `c_t` from `Q`.

pub mod exact;
pub mod pv;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::LogEvent;
use crate::dgp::DiscreteDgp;
use crate::error::{Error, Result};
use crate::policy::{clamp01, NonstationaryPolicy, RewardModel};
use crate::rng::seeded;
use crate::stats::CompensatedSum;

pub use exact::{enumerate_drns, ExactDrnsReport, ExactInstance, Step};
pub use pv::{pv_deviation_bound, ProgressiveValidationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrnsConfig {
    pub rho: f64,
    pub c_max: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
}

impl DrnsConfig {
    pub fn new(rho: f64, c_max: f64, horizon: usize) -> Result<Self> {
        let cfg = Self {
            rho,
            c_max,
            horizon,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::validation(format!(
                "rho must be in [0,1], got {}",
                self.rho
            )));
        }
        if !(self.c_max > 0.0 && self.c_max <= 1.0) {
            return Err(Error::validation(format!(
                "c_max must be in (0,1], got {}",
                self.c_max
            )));
        }
        if self.horizon == 0 {
            return Err(Error::validation("T must be at least 1"));
        }
        Ok(())
    }
}

/// How `c_t` is chosen after each acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MultiplierRule {
    /// `min{c_max, ρ-quantile of Q}`, starting from `c_max`.
    Quantile {
        rho: f64,
        c_max: f64,
    },
    Fixed(f64),
}

impl MultiplierRule {
    pub fn initial(&self) -> f64 {
        match *self {
            MultiplierRule::Quantile { c_max, .. } => c_max,
            MultiplierRule::Fixed(c) => c,
        }
    }
}

/// Rank used for the nearest-rank `ρ`-quantile of `n` values: `⌈ρn⌉`,
/// at least 1.
pub fn nearest_rank(rho: f64, n: usize) -> usize {
    let r = (rho * n as f64 - 1e-9).ceil();
    (r.max(1.0) as usize).min(n.max(1))
}

/// Streaming nearest-rank quantile of an insert-only multiset.
///
/// The lower heap always holds exactly the `⌈ρn⌉` smallest values, so the
/// quantile is its maximum.
#[derive(Debug, Clone)]
pub struct QuantileTracker {
    rho: f64,
    lower: BinaryHeap<OrderedFloat<f64>>,
    upper: BinaryHeap<Reverse<OrderedFloat<f64>>>,
}

impl QuantileTracker {
    pub fn new(rho: f64) -> Self {
        Self {
            rho,
            lower: BinaryHeap::new(),
            upper: BinaryHeap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len() + self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&mut self, value: f64) {
        let v = OrderedFloat(value);
        match self.lower.peek() {
            Some(top) if v < *top => self.lower.push(v),
            _ => self.upper.push(Reverse(v)),
        }
        let rank = nearest_rank(self.rho, self.len());
        while self.lower.len() > rank {
            let moved = self.lower.pop().expect("nonempty");
            self.upper.push(Reverse(moved));
        }
        while self.lower.len() < rank {
            let Reverse(moved) = self.upper.pop().expect("rank never exceeds size");
            self.lower.push(moved);
        }
    }

    pub fn quantile(&self) -> Option<f64> {
        self.lower.peek().map(|v| v.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub c_t: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrnsResult {
    pub success: bool,
    #[serde(rename = "V_drns")]
    pub v_drns: f64,
    #[serde(rename = "V_avg")]
    pub v_avg: f64,
    #[serde(rename = "C")]
    pub normalizer: f64,
    pub events_consumed: usize,
    pub blocks: Vec<Block>,
}

impl DrnsResult {
    pub fn accepted(&self) -> usize {
        self.blocks.len()
    }
}

/// A run plus the target state at the start of each completed block
/// (`h_0, …, h_{T−1}`).
#[derive(Debug, Clone)]
pub struct DrnsTrace<S> {
    pub result: DrnsResult,
    pub snapshots: Vec<S>,
}

enum Scoring<'a> {
    DoublyRobust(&'a dyn RewardModel),
    /// `r̂(x, π_t)` alone, as DR with an infinite propensity estimate.
    Direct(&'a dyn RewardModel),
    /// Sum of accepted outcomes only.
    Replay,
}

fn check_propensity(ev: &LogEvent, k: usize) -> Result<()> {
    if !(ev.propensity > 0.0 && ev.propensity <= 1.0) {
        return Err(Error::validation(format!(
            "event {k}: propensity {} outside (0,1]",
            ev.propensity
        )));
    }
    Ok(())
}

fn run_core<P, U>(
    events: &[LogEvent],
    target: &P,
    scoring: Scoring<'_>,
    rule: MultiplierRule,
    horizon: usize,
    uniforms: &mut U,
    keep_snapshots: bool,
) -> Result<DrnsTrace<P::State>>
where
    P: NonstationaryPolicy + ?Sized,
    U: FnMut() -> f64,
{
    if events.is_empty() {
        return Err(Error::domain(
            "replay evaluation needs a nonempty event stream",
        ));
    }
    let mut state = target.initial_state();
    let mut c = rule.initial();
    let mut q = match rule {
        MultiplierRule::Quantile { rho, .. } => Some(QuantileTracker::new(rho)),
        MultiplierRule::Fixed(_) => None,
    };
    let mut v_hat = CompensatedSum::new();
    let mut c_sum = CompensatedSum::new();
    let mut blocks = Vec::with_capacity(horizon);
    let mut snapshots = Vec::new();
    if keep_snapshots {
        snapshots.push(state.clone());
    }
    let mut block_size = 0usize;
    let replay = matches!(scoring, Scoring::Replay);

    for (k, ev) in events.iter().enumerate() {
        check_propensity(ev, k)?;
        let x = ev.features();
        let dist = target.distribution(x, &state);
        let pi = dist[ev.action];
        let p = ev.propensity;
        block_size += 1;

        match scoring {
            Scoring::DoublyRobust(model) => {
                let term = model.policy_value(x, &dist)
                    + (pi / p) * (ev.outcome - clamp01(model.predict(x, ev.action)));
                v_hat.add(c * term);
                c_sum.add(c);
            }
            Scoring::Direct(model) => {
                v_hat.add(c * model.policy_value(x, &dist));
                c_sum.add(c);
            }
            Scoring::Replay => {}
        }
        if let Some(q) = q.as_mut() {
            q.insert(if pi == 0.0 { f64::INFINITY } else { p / pi });
        }

        let u = uniforms();
        if pi > 0.0 && u <= c * pi / p {
            blocks.push(Block {
                c_t: c,
                size: block_size,
            });
            block_size = 0;
            if replay {
                v_hat.add(ev.outcome);
            }
            target.observe(&mut state, x, ev.action, ev.outcome);
            if blocks.len() == horizon {
                return Ok(DrnsTrace {
                    result: finish(true, &v_hat, &c_sum, replay, k + 1, blocks),
                    snapshots,
                });
            }
            if keep_snapshots {
                snapshots.push(state.clone());
            }
            if let (MultiplierRule::Quantile { c_max, .. }, Some(q)) = (rule, q.as_ref()) {
                c = c_max.min(q.quantile().expect("Q holds every processed event"));
            }
        }
    }
    Ok(DrnsTrace {
        result: finish(false, &v_hat, &c_sum, replay, events.len(), blocks),
        snapshots,
    })
}

fn finish(
    success: bool,
    v_hat: &CompensatedSum,
    c_sum: &CompensatedSum,
    replay: bool,
    consumed: usize,
    blocks: Vec<Block>,
) -> DrnsResult {
    let v_drns = v_hat.total();
    let normalizer = if replay {
        blocks.len() as f64
    } else {
        c_sum.total()
    };
    let v_avg = if normalizer > 0.0 {
        v_drns / normalizer
    } else {
        f64::NAN
    };
    DrnsResult {
        success,
        v_drns,
        v_avg,
        normalizer,
        events_consumed: consumed,
        blocks,
    }
}

fn rng_uniforms(seed: u64) -> impl FnMut() -> f64 {
    let mut rng = seeded(seed);
    move || rng.random::<f64>()
}

/// DR-ns with uniforms drawn from a seeded generator.
pub fn drns_run<P: NonstationaryPolicy + ?Sized>(
    events: &[LogEvent],
    target: &P,
    reward_model: &dyn RewardModel,
    config: &DrnsConfig,
    seed: u64,
) -> Result<DrnsResult> {
    drns_run_with_uniforms(
        events,
        target,
        reward_model,
        config,
        &mut rng_uniforms(seed),
    )
}

/// DR-ns with caller-supplied uniforms, one per processed event.
pub fn drns_run_with_uniforms<P, U>(
    events: &[LogEvent],
    target: &P,
    reward_model: &dyn RewardModel,
    config: &DrnsConfig,
    uniforms: &mut U,
) -> Result<DrnsResult>
where
    P: NonstationaryPolicy + ?Sized,
    U: FnMut() -> f64,
{
    config.validate()?;
    let rule = MultiplierRule::Quantile {
        rho: config.rho,
        c_max: config.c_max,
    };
    run_core(
        events,
        target,
        Scoring::DoublyRobust(reward_model),
        rule,
        config.horizon,
        uniforms,
        false,
    )
    .map(|t| t.result)
}

/// DR-ns keeping the target state at every block start, as needed by
/// [`ProgressiveValidationPolicy`].
pub fn drns_trace<P: NonstationaryPolicy + ?Sized>(
    events: &[LogEvent],
    target: &P,
    reward_model: &dyn RewardModel,
    rule: MultiplierRule,
    horizon: usize,
    seed: u64,
) -> Result<DrnsTrace<P::State>> {
    check_rule(&rule)?;
    if horizon == 0 {
        return Err(Error::validation("T must be at least 1"));
    }
    run_core(
        events,
        target,
        Scoring::DoublyRobust(reward_model),
        rule,
        horizon,
        &mut rng_uniforms(seed),
        true,
    )
}

fn check_rule(rule: &MultiplierRule) -> Result<()> {
    match *rule {
        MultiplierRule::Quantile { rho, c_max } => DrnsConfig::new(rho, c_max, 1).map(|_| ()),
        MultiplierRule::Fixed(c) if c > 0.0 && c <= 1.0 => Ok(()),
        MultiplierRule::Fixed(c) => Err(Error::validation(format!(
            "fixed multiplier must be in (0,1], got {c}"
        ))),
    }
}

/// DR-ns with an arbitrary multiplier rule and seeded uniforms.
pub fn drns_run_rule<P: NonstationaryPolicy + ?Sized>(
    events: &[LogEvent],
    target: &P,
    reward_model: &dyn RewardModel,
    rule: MultiplierRule,
    horizon: usize,
    seed: u64,
) -> Result<DrnsResult> {
    check_rule(&rule)?;
    if horizon == 0 {
        return Err(Error::validation("T must be at least 1"));
    }
    run_core(
        events,
        target,
        Scoring::DoublyRobust(reward_model),
        rule,
        horizon,
        &mut rng_uniforms(seed),
        false,
    )
    .map(|t| t.result)
}

/// Direct-method counterpart of [`drns_run_rule`]: the target history is
/// simulated the same way but each event contributes only `r̂(x_k, π_t)`.
pub fn dm_ns_run<P: NonstationaryPolicy + ?Sized>(
    events: &[LogEvent],
    target: &P,
    reward_model: &dyn RewardModel,
    rule: MultiplierRule,
    horizon: usize,
    seed: u64,
) -> Result<DrnsResult> {
    check_rule(&rule)?;
    if horizon == 0 {
        return Err(Error::validation("T must be at least 1"));
    }
    run_core(
        events,
        target,
        Scoring::Direct(reward_model),
        rule,
        horizon,
        &mut rng_uniforms(seed),
        false,
    )
    .map(|t| t.result)
}

/// Plain rejection-sampling replay with fixed multiplier `c`; the estimate
/// is the sum of accepted outcomes and `V_avg` their mean.
pub fn rs_run<P: NonstationaryPolicy + ?Sized>(
    events: &[LogEvent],
    target: &P,
    c: f64,
    horizon: usize,
    seed: u64,
) -> Result<DrnsResult> {
    rs_run_with_uniforms(events, target, c, horizon, &mut rng_uniforms(seed))
}

pub fn rs_run_with_uniforms<P, U>(
    events: &[LogEvent],
    target: &P,
    c: f64,
    horizon: usize,
    uniforms: &mut U,
) -> Result<DrnsResult>
where
    P: NonstationaryPolicy + ?Sized,
    U: FnMut() -> f64,
{
    let rule = MultiplierRule::Fixed(c);
    check_rule(&rule)?;
    if horizon == 0 {
        return Err(Error::validation("T must be at least 1"));
    }
    run_core(
        events,
        target,
        Scoring::Replay,
        rule,
        horizon,
        uniforms,
        false,
    )
    .map(|t| t.result)
}

/// DR-ns with `c_t` frozen at the smallest exploration probability.
pub fn wc_run<P: NonstationaryPolicy + ?Sized>(
    events: &[LogEvent],
    target: &P,
    reward_model: &dyn RewardModel,
    min_propensity: f64,
    horizon: usize,
    seed: u64,
) -> Result<DrnsResult> {
    drns_run_rule(
        events,
        target,
        reward_model,
        MultiplierRule::Fixed(min_propensity),
        horizon,
        seed,
    )
}

/// Consecutive runs over one stream, each restarting from an empty target
/// history on the first unconsumed event. Stops at the first failure or
/// after `max_runs` successes; only successful runs are returned.
pub fn drns_replicates<P: NonstationaryPolicy + ?Sized>(
    events: &[LogEvent],
    target: &P,
    reward_model: &dyn RewardModel,
    config: &DrnsConfig,
    seed: u64,
    max_runs: usize,
) -> Result<Vec<DrnsResult>> {
    config.validate()?;
    let mut uniforms = rng_uniforms(seed);
    let mut out = Vec::new();
    let mut offset = 0;
    while out.len() < max_runs && offset < events.len() {
        let r = drns_run_with_uniforms(
            &events[offset..],
            target,
            reward_model,
            config,
            &mut uniforms,
        )?;
        if !r.success {
            break;
        }
        offset += r.events_consumed;
        out.push(r);
    }
    Ok(out)
}

fn check_requirement_inputs(alpha: f64, delta: f64, trajectories: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!(
            "alpha must be in (0,1], got {alpha}"
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!(
            "delta must be in (0,1], got {delta}"
        )));
    }
    if trajectories == 0 {
        return Err(Error::domain("need at least one trajectory"));
    }
    Ok(())
}

/// Events needed so that `m` trajectories of length `T` fail with
/// probability at most `δ` when each event is accepted with probability at
/// least `α`: `⌈(mT + ln(e/δ))/α⌉`.
///
/// Only the log term separates this from the mean requirement `mT/α`, so the
/// actual failure probability exceeds `δ` once `mT` is more than a handful
/// (it tends to 1/2 as `mT` grows). Use
/// [`failure_sample_requirement_exact`] to size streams.
pub fn failure_sample_requirement(
    horizon: usize,
    alpha: f64,
    delta: f64,
    trajectories: usize,
) -> Result<u64> {
    check_requirement_inputs(alpha, delta, trajectories)?;
    let numer = (trajectories * horizon) as f64 + 1.0 - delta.ln();
    Ok((numer / alpha).ceil() as u64)
}

/// `P[Bin(n, α) < k]`, summed in log space.
pub fn acceptance_shortfall_probability(n: u64, alpha: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if n < k {
        return 1.0;
    }
    if alpha >= 1.0 {
        return 0.0;
    }
    let (ln_a, ln_b) = (alpha.ln(), (1.0 - alpha).ln());
    let mut log_pmf = n as f64 * ln_b;
    let mut terms = Vec::with_capacity(k as usize);
    for j in 0..k {
        terms.push(log_pmf);
        log_pmf += ((n - j) as f64 / (j + 1) as f64).ln() + ln_a - ln_b;
    }
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln())
        .exp()
        .min(1.0)
}

/// Smallest `n` with `P[Bin(n, α) < mT] ≤ δ`: the exact stream length for
/// which `m` trajectories of length `T` fail with probability at most `δ`.
pub fn failure_sample_requirement_exact(
    horizon: usize,
    alpha: f64,
    delta: f64,
    trajectories: usize,
) -> Result<u64> {
    check_requirement_inputs(alpha, delta, trajectories)?;
    let k = (trajectories * horizon) as u64;
    let ok = |n: u64| acceptance_shortfall_probability(n, alpha, k) <= delta;
    let mut hi = k.max(1);
    while !ok(hi) {
        hi *= 2;
    }
    let mut lo = k;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// `ε_k = P_{π_t}[E] − P_μ[E]/c` with `E = {(x,a): c·π_t(a|x) > μ(a|x)}`;
/// `pi` holds `π_t(·|x)` for every context of the DGP.
pub fn bias_mass_exact(dgp: &DiscreteDgp, pi: &[Vec<f64>], c: f64) -> f64 {
    let mut eps = 0.0;
    for (x, row) in pi.iter().enumerate() {
        for (a, &p) in row.iter().enumerate() {
            let mu = dgp.mu(x, a);
            if c * p > mu {
                eps += dgp.context_prob(x) * (p - mu / c);
            }
        }
    }
    eps
}

/// Per-step bias masses and their cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasMass {
    pub per_step: Vec<f64>,
    pub eps: f64,
}

impl BiasMass {
    pub fn from_steps(per_step: Vec<f64>) -> Self {
        let eps = per_step.iter().copied().fold(0.0, f64::max);
        Self { per_step, eps }
    }
}

/// Bias bound on the cumulative estimate: `T(T+1)/2 · ε/(1−ε)`.
pub fn nonstationary_bias_bound(eps: f64, horizon: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::domain(format!(
            "bias mass must be in [0,1), got {eps}"
        )));
    }
    let t = horizon as f64;
    Ok(t * (t + 1.0) / 2.0 * eps / (1.0 - eps))
}

/// Bound on the L1 distance between simulated and true history laws:
/// `2εT/(1−ε)`.
pub fn history_distance_bound(eps: f64, horizon: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::domain(format!(
            "bias mass must be in [0,1), got {eps}"
        )));
    }
    Ok(2.0 * eps * horizon as f64 / (1.0 - eps))
}
