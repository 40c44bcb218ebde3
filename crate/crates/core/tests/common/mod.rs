//! Independent oracles shared by the integration tests: brute-force
//! enumeration over a DGP's joint law and random problem generators.

#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use dreval::dgp::{make_discrete_dgp, DgpSpec};
use dreval::rng::seeded;
use dreval::{Context, DiscreteDgp, LogEvent, SparseVec};
use rand::Rng;

pub type Rows = Vec<Vec<f64>>;

/// Random DGP with at most the given sizes (each at least 1, actions at least 2).
pub fn random_dgp(
    seed: u64,
    max_contexts: usize,
    max_actions: usize,
    max_support: usize,
) -> DiscreteDgp {
    let mut rng = seeded(seed ^ 0x5eed);
    make_discrete_dgp(&DgpSpec {
        contexts: rng.random_range(1..=max_contexts),
        actions: rng.random_range(2..=max_actions),
        support: rng.random_range(1..=max_support),
        deterministic_rewards: false,
        seed,
    })
    .unwrap()
}

pub fn random_simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

pub fn random_policy<R: Rng>(rng: &mut R, nx: usize, k: usize) -> Rows {
    (0..nx).map(|_| random_simplex(rng, k)).collect()
}

pub fn random_deterministic<R: Rng>(rng: &mut R, nx: usize, k: usize) -> Vec<usize> {
    (0..nx).map(|_| rng.random_range(0..k)).collect()
}

pub fn random_table<R: Rng>(rng: &mut R, nx: usize, k: usize, lo: f64, hi: f64) -> Rows {
    (0..nx)
        .map(|_| (0..k).map(|_| rng.random_range(lo..hi)).collect())
        .collect()
}

/// `μ̂ = μ / ρ` with `ρ` drawn from `[lo, hi]`.
pub fn perturbed_propensities<R: Rng>(rng: &mut R, dgp: &DiscreteDgp, lo: f64, hi: f64) -> Rows {
    (0..dgp.num_contexts())
        .map(|x| {
            (0..dgp.num_actions())
                .map(|a| dgp.mu(x, a) / rng.random_range(lo..=hi))
                .collect()
        })
        .collect()
}

/// One DR term written out directly from its definition.
pub fn term_value(nu: &[f64], r_hat: &[f64], mu_hat: f64, a: usize, r: f64) -> f64 {
    let baseline: f64 = nu.iter().zip(r_hat).map(|(p, v)| p * v).sum();
    let w = if mu_hat.is_infinite() {
        0.0
    } else {
        nu[a] / mu_hat
    };
    baseline + w * (r - r_hat[a])
}

/// Mean and variance of one DR term over every `(x, a, r)` outcome of the
/// logging law.
pub fn enumerate_term(
    dgp: &DiscreteDgp,
    nu: &[Vec<f64>],
    r_hat: &[Vec<f64>],
    mu_hat: &[Vec<f64>],
) -> (f64, f64) {
    let mut outcomes = Vec::new();
    for x in 0..dgp.num_contexts() {
        for a in 0..dgp.num_actions() {
            let law = dgp.reward_law(x, a);
            for (r, pr) in law.values.iter().zip(&law.probs) {
                let p = dgp.context_prob(x) * dgp.mu(x, a) * pr;
                outcomes.push((p, term_value(&nu[x], &r_hat[x], mu_hat[x][a], a, *r)));
            }
        }
    }
    let mean: f64 = outcomes.iter().map(|(p, v)| p * v).sum();
    let var: f64 = outcomes.iter().map(|(p, v)| p * (v - mean).powi(2)).sum();
    (mean, var)
}

/// `V(ν)` summed directly over contexts, actions and reward support.
pub fn enumerate_value(dgp: &DiscreteDgp, nu: &[Vec<f64>]) -> f64 {
    let mut v = 0.0;
    for x in 0..dgp.num_contexts() {
        for a in 0..dgp.num_actions() {
            let law = dgp.reward_law(x, a);
            for (r, pr) in law.values.iter().zip(&law.probs) {
                v += dgp.context_prob(x) * nu[x][a] * pr * r;
            }
        }
    }
    v
}

/// Random log over dense feature vectors, unrelated to any DGP.
pub fn random_log<R: Rng>(rng: &mut R, n: usize, k: usize, dim: usize) -> Vec<LogEvent> {
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            LogEvent::new(
                Context::new(SparseVec::from_dense(&x)),
                rng.random_range(0..k),
                rng.random::<f64>(),
                rng.random_range(0.01..=1.0),
            )
            .unwrap()
        })
        .collect()
}

/// Normalized distribution from a feature vector, deterministic in `x`.
pub fn softmax_of(x: &SparseVec, k: usize) -> Vec<f64> {
    let scores: Vec<f64> = (0..k)
        .map(|a| {
            x.iter()
                .map(|(i, v)| v * (((i as usize + 1) * (a + 2)) % 7) as f64 / 3.0)
                .sum()
        })
        .collect();
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// History-dependent target on DGP contexts: each accepted step pulls the
/// distribution toward the action it took when its reward was high, or
/// toward the next action otherwise.
pub fn adaptive_dist(base: &Rows, history: &[(usize, usize, f64)], x: usize) -> Vec<f64> {
    let k = base[x].len();
    let mut d = base[x].clone();
    for &(_, a, r) in history {
        let pull = if r > 0.5 { a } else { (a + 1) % k };
        for (b, p) in d.iter_mut().enumerate() {
            *p = 0.7 * *p + if b == pull { 0.3 } else { 0.0 };
        }
    }
    d
}

pub struct AdaptivePolicy {
    pub base: Rows,
}

impl dreval::NonstationaryPolicy for AdaptivePolicy {
    type State = Vec<(usize, usize, f64)>;

    fn num_actions(&self) -> usize {
        self.base[0].len()
    }

    fn initial_state(&self) -> Self::State {
        Vec::new()
    }

    fn distribution(&self, x: &SparseVec, state: &Self::State) -> Vec<f64> {
        adaptive_dist(&self.base, state, DiscreteDgp::context_index(x).unwrap())
    }

    fn observe(&self, state: &mut Self::State, x: &SparseVec, action: usize, outcome: f64) {
        state.push((DiscreteDgp::context_index(x).unwrap(), action, outcome));
    }
}

/// The same target in the form the exact enumerator expects.
pub fn adaptive_history_policy<'a>(
    dgp: &'a DiscreteDgp,
    base: &'a Rows,
) -> impl Fn(&[dreval::nonstat::Step], usize) -> Vec<f64> + Sync + 'a {
    move |steps, x| {
        let h: Vec<(usize, usize, f64)> = steps
            .iter()
            .map(|s| (s.x, s.a, dgp.reward_law(s.x, s.a).values[s.r_index]))
            .collect();
        adaptive_dist(base, &h, x)
    }
}

pub fn min_mu(dgp: &DiscreteDgp) -> f64 {
    dgp.exploration()
        .iter()
        .flatten()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}
