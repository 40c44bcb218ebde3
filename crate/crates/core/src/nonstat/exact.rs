//! Exact law of a DR-ns run on a tiny enumerable instance.
//!
//! Instead of sampling `u_k`, every processed event branches into its
//! accept and reject outcomes with their probabilities. The forward pass
//! tracks, for each reachable algorithm state, its probability mass and the
//! mass-weighted running estimate `Σ c_t V̂_k`. Exploration is assumed
//! unbounded; the pass stops once the mass of unfinished runs falls below
//! `tolerance`.

use std::collections::HashMap;

use serde::Serialize;

use super::{bias_mass_exact, nearest_rank, MultiplierRule};
use crate::dgp::DiscreteDgp;
use crate::error::{Error, Result};

/// Largest number of live algorithm states or target histories.
pub const MAX_STATES: usize = 1_000_000;

/// One accepted step of the simulated target history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Step {
    pub x: usize,
    pub a: usize,
    /// Index into the support of `D(r|x,a)`.
    pub r_index: usize,
}

/// Target policy as a function of the history and the context index.
pub type HistoryPolicy<'a> = dyn Fn(&[Step], usize) -> Vec<f64> + Sync + 'a;

pub struct ExactInstance<'a> {
    pub dgp: &'a DiscreteDgp,
    pub target: &'a HistoryPolicy<'a>,
    /// `r̂[x][a]`, already in `[0,1]`.
    pub r_hat: Vec<Vec<f64>>,
    pub rule: MultiplierRule,
    pub horizon: usize,
    pub tolerance: f64,
    pub max_events: usize,
}

impl<'a> ExactInstance<'a> {
    pub fn new(
        dgp: &'a DiscreteDgp,
        target: &'a HistoryPolicy<'a>,
        r_hat: Vec<Vec<f64>>,
        rule: MultiplierRule,
        horizon: usize,
    ) -> Self {
        Self {
            dgp,
            target,
            r_hat,
            rule,
            horizon,
            tolerance: 1e-13,
            max_events: 100_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactDrnsReport {
    /// `E[Σ_t c_t V̂_{B(t)}]`.
    pub expected_estimate: f64,
    /// `E_π[Σ_t r_t]`.
    pub true_value: f64,
    pub bias: f64,
    /// Largest bias mass over every reachable (history, `c_t`) pair.
    pub eps: f64,
    /// `Σ_h |π̂(h_T) − π(h_T)|`.
    pub total_variation: f64,
    /// Mass of runs still unfinished when the pass stopped.
    pub residual_mass: f64,
    pub events_processed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum QSummary {
    Unused,
    Min(u64),
    Max(u64),
    /// Sorted (ratio bits, multiplicity); positive floats order like their bits.
    Counts(Vec<(u64, u32)>),
}

impl QSummary {
    fn empty(rule: &MultiplierRule) -> Self {
        match *rule {
            MultiplierRule::Fixed(_) => QSummary::Unused,
            MultiplierRule::Quantile { rho: 0.0, .. } => QSummary::Min(f64::INFINITY.to_bits()),
            MultiplierRule::Quantile { rho: 1.0, .. } => QSummary::Max(0),
            MultiplierRule::Quantile { .. } => QSummary::Counts(Vec::new()),
        }
    }

    fn insert(&self, ratio: f64) -> Self {
        let bits = ratio.to_bits();
        match self {
            QSummary::Unused => QSummary::Unused,
            QSummary::Min(m) => QSummary::Min((*m).min(bits)),
            QSummary::Max(m) => QSummary::Max((*m).max(bits)),
            QSummary::Counts(v) => {
                let mut v = v.clone();
                match v.binary_search_by_key(&bits, |e| e.0) {
                    Ok(i) => v[i].1 += 1,
                    Err(i) => v.insert(i, (bits, 1)),
                }
                QSummary::Counts(v)
            }
        }
    }

    fn quantile(&self, rho: f64) -> f64 {
        match self {
            QSummary::Unused => unreachable!("fixed rule has no quantile"),
            QSummary::Min(b) | QSummary::Max(b) => f64::from_bits(*b),
            QSummary::Counts(v) => {
                let n: usize = v.iter().map(|e| e.1 as usize).sum();
                let rank = nearest_rank(rho, n);
                let mut seen = 0;
                for &(bits, count) in v {
                    seen += count as usize;
                    if seen >= rank {
                        return f64::from_bits(bits);
                    }
                }
                unreachable!("rank within multiset size")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct StateKey {
    history: Vec<Step>,
    c_bits: u64,
    q: QSummary,
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    mass: f64,
    /// `E[S · 1{state}]` for the running estimate `S`.
    value: f64,
}

impl Acc {
    fn add(&mut self, mass: f64, value: f64) {
        self.mass += mass;
        self.value += value;
    }
}

fn capacity(what: &str, n: usize) -> Error {
    Error::Capacity(format!(
        "{what}: {n} exceeds the enumeration limit of {MAX_STATES}"
    ))
}

/// Law of complete target histories of length `T` under `π` itself.
fn target_history_law(inst: &ExactInstance<'_>) -> Result<HashMap<Vec<Step>, f64>> {
    let dgp = inst.dgp;
    let mut layer: HashMap<Vec<Step>, f64> = HashMap::from([(Vec::new(), 1.0)]);
    for _ in 0..inst.horizon {
        let mut next = HashMap::new();
        for (h, m) in &layer {
            for x in 0..dgp.num_contexts() {
                let px = dgp.context_prob(x);
                if px == 0.0 {
                    continue;
                }
                let pi = (inst.target)(h, x);
                for (a, &pa) in pi.iter().enumerate() {
                    if pa == 0.0 {
                        continue;
                    }
                    let law = dgp.reward_law(x, a);
                    for (ri, &pr) in law.probs.iter().enumerate() {
                        if pr == 0.0 {
                            continue;
                        }
                        let mut h2 = h.clone();
                        h2.push(Step { x, a, r_index: ri });
                        *next.entry(h2).or_insert(0.0) += m * px * pa * pr;
                    }
                }
            }
        }
        if next.len() > MAX_STATES {
            return Err(capacity("target histories", next.len()));
        }
        layer = next;
    }
    Ok(layer)
}

fn history_reward(dgp: &DiscreteDgp, h: &[Step]) -> f64 {
    h.iter()
        .map(|s| dgp.reward_law(s.x, s.a).values[s.r_index])
        .sum()
}

/// Runs the exact forward pass.
pub fn enumerate_drns(inst: &ExactInstance<'_>) -> Result<ExactDrnsReport> {
    let dgp = inst.dgp;
    let (nx, k) = (dgp.num_contexts(), dgp.num_actions());
    if inst.r_hat.len() != nx || inst.r_hat.iter().any(|row| row.len() != k) {
        return Err(Error::validation("r_hat table does not match the DGP"));
    }
    let pi_law = target_history_law(inst)?;
    let true_value: f64 = pi_law.iter().map(|(h, m)| m * history_reward(dgp, h)).sum();

    if inst.horizon == 0 {
        return Ok(ExactDrnsReport {
            expected_estimate: 0.0,
            true_value,
            bias: 0.0,
            eps: 0.0,
            total_variation: 0.0,
            residual_mass: 0.0,
            events_processed: 0,
        });
    }

    let mut policy_memo: HashMap<Vec<Step>, Vec<Vec<f64>>> = HashMap::new();
    let mut eps_memo: HashMap<(Vec<Step>, u64), f64> = HashMap::new();
    let mut terminal: HashMap<Vec<Step>, Acc> = HashMap::new();
    let mut live: HashMap<StateKey, Acc> = HashMap::from([(
        StateKey {
            history: Vec::new(),
            c_bits: inst.rule.initial().to_bits(),
            q: QSummary::empty(&inst.rule),
        },
        Acc {
            mass: 1.0,
            value: 0.0,
        },
    )]);
    let mut events = 0;
    let mut eps_max = 0.0f64;

    while events < inst.max_events {
        let live_mass: f64 = live.values().map(|a| a.mass).sum();
        if live_mass < inst.tolerance {
            break;
        }
        events += 1;
        let mut next: HashMap<StateKey, Acc> = HashMap::with_capacity(live.len() * 2);
        for (key, acc) in &live {
            let c = f64::from_bits(key.c_bits);
            let pi_rows = policy_memo
                .entry(key.history.clone())
                .or_insert_with(|| (0..nx).map(|x| (inst.target)(&key.history, x)).collect())
                .clone();
            let eps = *eps_memo
                .entry((key.history.clone(), key.c_bits))
                .or_insert_with(|| bias_mass_exact(dgp, &pi_rows, c));
            eps_max = eps_max.max(eps);

            for x in 0..nx {
                let px = dgp.context_prob(x);
                if px == 0.0 {
                    continue;
                }
                let pi = &pi_rows[x];
                let baseline: f64 = (0..k).map(|a| pi[a] * inst.r_hat[x][a]).sum();
                for a in 0..k {
                    let mu = dgp.mu(x, a);
                    let ratio = if pi[a] == 0.0 {
                        f64::INFINITY
                    } else {
                        mu / pi[a]
                    };
                    let accept = if pi[a] > 0.0 {
                        (c * pi[a] / mu).min(1.0)
                    } else {
                        0.0
                    };
                    let q_next = key.q.insert(ratio);
                    let law = dgp.reward_law(x, a);
                    for (ri, &pr) in law.probs.iter().enumerate() {
                        let p_event = px * mu * pr;
                        if p_event == 0.0 {
                            continue;
                        }
                        let r = law.values[ri];
                        let term = baseline + (pi[a] / mu) * (r - inst.r_hat[x][a]);
                        let mass = acc.mass * p_event;
                        let value = acc.value * p_event + mass * c * term;
                        if accept < 1.0 {
                            next.entry(StateKey {
                                history: key.history.clone(),
                                c_bits: key.c_bits,
                                q: q_next.clone(),
                            })
                            .or_default()
                            .add(mass * (1.0 - accept), value * (1.0 - accept));
                        }
                        if accept > 0.0 {
                            let mut h2 = key.history.clone();
                            h2.push(Step { x, a, r_index: ri });
                            if h2.len() == inst.horizon {
                                terminal
                                    .entry(h2)
                                    .or_default()
                                    .add(mass * accept, value * accept);
                            } else {
                                let c2 = match inst.rule {
                                    MultiplierRule::Fixed(c) => c,
                                    MultiplierRule::Quantile { rho, c_max } => {
                                        c_max.min(q_next.quantile(rho))
                                    }
                                };
                                next.entry(StateKey {
                                    history: h2,
                                    c_bits: c2.to_bits(),
                                    q: q_next.clone(),
                                })
                                .or_default()
                                .add(mass * accept, value * accept);
                            }
                        }
                    }
                }
            }
        }
        if next.len() > MAX_STATES {
            return Err(capacity("live algorithm states", next.len()));
        }
        live = next;
    }

    let residual_mass: f64 = live.values().map(|a| a.mass).sum();
    let expected_estimate: f64 = terminal.values().map(|a| a.value).sum();
    let mut tv = 0.0;
    for (h, m) in &pi_law {
        tv += (terminal.get(h).map_or(0.0, |a| a.mass) - m).abs();
    }
    for (h, a) in &terminal {
        if !pi_law.contains_key(h) {
            tv += a.mass;
        }
    }
    Ok(ExactDrnsReport {
        expected_estimate,
        true_value,
        bias: (expected_estimate - true_value).abs(),
        eps: eps_max,
        total_variation: tv,
        residual_mass,
        events_processed: events,
    })
}
