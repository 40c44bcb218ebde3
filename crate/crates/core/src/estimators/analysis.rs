//! Closed-form moments of the single doubly robust term on an enumerable DGP.
//!
//! Everything here assumes stationary exploration `μ` and a stationary
//! propensity estimate `μ̂`, both given as tables over the DGP's contexts.
//! With `ν` the target, `Δ = r̂ − r*` and `ρ = μ/μ̂` (`ρ = 0` where `μ̂ = +∞`):
//!
//! * expectation: `E_ν[r* + (1−ρ)Δ]`
//! * variance: `Var_x[E_ν(r* + (1−ρ)Δ)] − E_x[E_ν(ρΔ)²] + E_ν[(ν/μ̂)ρ Var_r] + E_ν[(ν/μ̂)ρΔ²]`

use crate::dgp::DiscreteDgp;
use crate::error::{Error, Result};
use crate::policy::{clamp01, RewardModel, StationaryPolicy};

/// `Δ(x,a)` and `ρ(x,a)` for a reward model and propensity estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDecomposition {
    r_hat: Vec<Vec<f64>>,
    mu_hat: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    rho: Vec<Vec<f64>>,
}

impl ErrorDecomposition {
    /// Builds the decomposition from tables `r̂[x][a]` (clamped to `[0,1]`) and
    /// `μ̂[x][a] ∈ (0, +∞]`.
    pub fn new(dgp: &DiscreteDgp, r_hat: Vec<Vec<f64>>, mu_hat: Vec<Vec<f64>>) -> Result<Self> {
        let (nx, k) = (dgp.num_contexts(), dgp.num_actions());
        if r_hat.len() != nx || mu_hat.len() != nx {
            return Err(Error::validation(
                "model tables must have one row per context",
            ));
        }
        let mut delta = Vec::with_capacity(nx);
        let mut rho = Vec::with_capacity(nx);
        let mut r_clamped = Vec::with_capacity(nx);
        for x in 0..nx {
            if r_hat[x].len() != k || mu_hat[x].len() != k {
                return Err(Error::validation(format!(
                    "model table row {x} has wrong width"
                )));
            }
            let rr: Vec<f64> = r_hat[x].iter().map(|&v| clamp01(v)).collect();
            let mut drow = Vec::with_capacity(k);
            let mut prow = Vec::with_capacity(k);
            for a in 0..k {
                let m = mu_hat[x][a];
                if m.is_nan() || m <= 0.0 {
                    return Err(Error::domain(format!(
                        "propensity estimate ({x},{a}) = {m}"
                    )));
                }
                drow.push(rr[a] - dgp.r_star(x, a));
                prow.push(if m.is_infinite() {
                    0.0
                } else {
                    dgp.mu(x, a) / m
                });
            }
            delta.push(drow);
            rho.push(prow);
            r_clamped.push(rr);
        }
        Ok(Self {
            r_hat: r_clamped,
            mu_hat,
            delta,
            rho,
        })
    }

    /// Tabulates a reward model on the DGP's one-hot contexts.
    pub fn from_model(
        dgp: &DiscreteDgp,
        reward_model: &dyn RewardModel,
        mu_hat: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let r_hat = (0..dgp.num_contexts())
            .map(|x| {
                let fx = DiscreteDgp::context_features(x);
                (0..dgp.num_actions())
                    .map(|a| reward_model.predict(&fx, a))
                    .collect()
            })
            .collect();
        Self::new(dgp, r_hat, mu_hat)
    }

    /// `r̂ = r*` and `μ̂ = μ`.
    pub fn exact(dgp: &DiscreteDgp) -> Self {
        Self::new(dgp, dgp.r_star_table(), dgp.exploration().to_vec())
            .expect("exact models are always valid")
    }

    pub fn r_hat(&self, x: usize, a: usize) -> f64 {
        self.r_hat[x][a]
    }

    pub fn mu_hat(&self, x: usize, a: usize) -> f64 {
        self.mu_hat[x][a]
    }

    pub fn delta(&self, x: usize, a: usize) -> f64 {
        self.delta[x][a]
    }

    pub fn rho(&self, x: usize, a: usize) -> f64 {
        self.rho[x][a]
    }

    pub fn r_hat_table(&self) -> &[Vec<f64>] {
        &self.r_hat
    }

    pub fn mu_hat_table(&self) -> &[Vec<f64>] {
        &self.mu_hat
    }

    /// `ν(a|x)/μ̂(a|x)`, zero where `μ̂ = +∞`.
    pub fn weight(&self, nu: f64, x: usize, a: usize) -> f64 {
        let m = self.mu_hat[x][a];
        if m.is_infinite() {
            0.0
        } else {
            nu / m
        }
    }
}

/// The four summands of the single-term variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceDecomposition {
    pub context_variance: f64,
    pub correlation_reduction: f64,
    pub reward_noise_penalty: f64,
    pub model_error_penalty: f64,
}

impl VarianceDecomposition {
    pub fn total(&self) -> f64 {
        self.context_variance - self.correlation_reduction
            + self.reward_noise_penalty
            + self.model_error_penalty
    }
}

fn policy_rows(dgp: &DiscreteDgp, policy: &dyn StationaryPolicy) -> Vec<Vec<f64>> {
    dgp.policy_table(policy)
}

/// `E_{(x,a)∼ν}[f(x,a)]`.
pub(crate) fn expect_nu(
    dgp: &DiscreteDgp,
    nu: &[Vec<f64>],
    f: impl Fn(usize, usize) -> f64,
) -> f64 {
    let mut total = 0.0;
    for (x, row) in nu.iter().enumerate() {
        let mut inner = 0.0;
        for (a, &p) in row.iter().enumerate() {
            if p != 0.0 {
                inner += p * f(x, a);
            }
        }
        total += dgp.context_prob(x) * inner;
    }
    total
}

/// `Var_{x∼D}[g(x)]`.
pub(crate) fn var_x(dgp: &DiscreteDgp, g: impl Fn(usize) -> f64) -> f64 {
    let vals: Vec<f64> = (0..dgp.num_contexts()).map(g).collect();
    let mean: f64 = vals
        .iter()
        .enumerate()
        .map(|(x, v)| dgp.context_prob(x) * v)
        .sum();
    vals.iter()
        .enumerate()
        .map(|(x, v)| dgp.context_prob(x) * (v - mean) * (v - mean))
        .sum()
}

/// `E_a∼ν(·|x)[f(x,a)]`.
fn inner_nu(nu: &[Vec<f64>], x: usize, f: impl Fn(usize) -> f64) -> f64 {
    nu[x]
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(a, &p)| p * f(a))
        .sum()
}

/// `E[V̂_k] = E_ν[r* + (1−ρ)Δ]`.
pub fn term_expectation_exact(
    dgp: &DiscreteDgp,
    policy: &dyn StationaryPolicy,
    dec: &ErrorDecomposition,
) -> f64 {
    let nu = policy_rows(dgp, policy);
    expect_nu(dgp, &nu, |x, a| {
        dgp.r_star(x, a) + (1.0 - dec.rho(x, a)) * dec.delta(x, a)
    })
}

pub fn term_variance_decomposition(
    dgp: &DiscreteDgp,
    policy: &dyn StationaryPolicy,
    dec: &ErrorDecomposition,
) -> VarianceDecomposition {
    let nu = policy_rows(dgp, policy);
    let context_variance = var_x(dgp, |x| {
        inner_nu(&nu, x, |a| {
            dgp.r_star(x, a) + (1.0 - dec.rho(x, a)) * dec.delta(x, a)
        })
    });
    let correlation_reduction: f64 = (0..dgp.num_contexts())
        .map(|x| {
            let m = inner_nu(&nu, x, |a| dec.rho(x, a) * dec.delta(x, a));
            dgp.context_prob(x) * m * m
        })
        .sum();
    let reward_noise_penalty = expect_nu(dgp, &nu, |x, a| {
        dec.weight(nu[x][a], x, a) * dec.rho(x, a) * dgp.reward_variance(x, a)
    });
    let model_error_penalty = expect_nu(dgp, &nu, |x, a| {
        let d = dec.delta(x, a);
        dec.weight(nu[x][a], x, a) * dec.rho(x, a) * d * d
    });
    VarianceDecomposition {
        context_variance,
        correlation_reduction,
        reward_noise_penalty,
        model_error_penalty,
    }
}

/// `Var[V̂_k]` from its four-term decomposition.
pub fn term_variance_exact(
    dgp: &DiscreteDgp,
    policy: &dyn StationaryPolicy,
    dec: &ErrorDecomposition,
) -> f64 {
    term_variance_decomposition(dgp, policy, dec).total()
}

/// Largest `ν/μ̂` over the support of `μ` (every pair, since `μ > 0`).
pub fn max_weight(
    dgp: &DiscreteDgp,
    policy: &dyn StationaryPolicy,
    dec: &ErrorDecomposition,
) -> f64 {
    let nu = policy_rows(dgp, policy);
    let mut m = 0.0f64;
    for x in 0..dgp.num_contexts() {
        if dgp.context_prob(x) == 0.0 {
            continue;
        }
        for a in 0..dgp.num_actions() {
            m = m.max(dec.weight(nu[x][a], x, a));
        }
    }
    m
}

/// Upper bound `Var_x[r*(x,ν)] + 2E_ν|(1−ρ)Δ| + M·E_ν[ρ·E_r(r−r̂)²]`.
pub fn term_variance_bound(
    dgp: &DiscreteDgp,
    policy: &dyn StationaryPolicy,
    dec: &ErrorDecomposition,
) -> f64 {
    let nu = policy_rows(dgp, policy);
    let m = max_weight(dgp, policy, dec);
    let v = var_x(dgp, |x| inner_nu(&nu, x, |a| dgp.r_star(x, a)));
    let slack = expect_nu(dgp, &nu, |x, a| {
        ((1.0 - dec.rho(x, a)) * dec.delta(x, a)).abs()
    });
    let penalty = expect_nu(dgp, &nu, |x, a| {
        dec.rho(x, a) * dgp.reward_law(x, a).mean_sq_error(dec.r_hat(x, a))
    });
    v + 2.0 * slack + m * penalty
}

/// `|E_ν[(1−ρ)Δ]|`; only the stationary-exploration case has a closed form.
pub fn dr_bias_exact(
    dgp: &DiscreteDgp,
    policy: &dyn StationaryPolicy,
    dec: &ErrorDecomposition,
    stationary: bool,
) -> Result<f64> {
    if !stationary {
        return Err(Error::domain(
            "exact bias needs stationary exploration; use Monte Carlo otherwise",
        ));
    }
    let nu = policy_rows(dgp, policy);
    Ok(expect_nu(dgp, &nu, |x, a| (1.0 - dec.rho(x, a)) * dec.delta(x, a)).abs())
}

/// `|E_ν[Δ]|`.
pub fn dm_bias_exact(
    dgp: &DiscreteDgp,
    policy: &dyn StationaryPolicy,
    dec: &ErrorDecomposition,
) -> f64 {
    let nu = policy_rows(dgp, policy);
    expect_nu(dgp, &nu, |x, a| dec.delta(x, a)).abs()
}

/// `|E_ν[r*(1−ρ)]|`.
pub fn ips_bias_exact(
    dgp: &DiscreteDgp,
    policy: &dyn StationaryPolicy,
    dec: &ErrorDecomposition,
) -> f64 {
    let nu = policy_rows(dgp, policy);
    expect_nu(dgp, &nu, |x, a| dgp.r_star(x, a) * (1.0 - dec.rho(x, a))).abs()
}

fn deterministic_actions(dgp: &DiscreteDgp, policy: &dyn StationaryPolicy) -> Result<Vec<usize>> {
    policy_rows(dgp, policy)
        .iter()
        .enumerate()
        .map(|(x, row)| {
            let ones: Vec<usize> = (0..row.len()).filter(|&a| row[a] == 1.0).collect();
            let others = row.iter().filter(|&&p| p != 0.0).count();
            match (ones.as_slice(), others) {
                ([a], 1) => Ok(*a),
                _ => Err(Error::domain(format!(
                    "target policy is not deterministic at context {x}: {row:?}"
                ))),
            }
        })
        .collect()
}

/// `Var_{(x,a)∼ν}[f] + E_ν[(1/μ̂)ρ Var_r] + E_ν[((1−μ)/μ̂)ρ g²]` for a
/// deterministic `ν`, with `f`/`g` chosen by the estimator.
fn deterministic_variance(
    dgp: &DiscreteDgp,
    actions: &[usize],
    dec: &ErrorDecomposition,
    f: impl Fn(usize, usize) -> f64,
    g: impl Fn(usize, usize) -> f64,
) -> f64 {
    let first = var_x(dgp, |x| f(x, actions[x]));
    let mut second = 0.0;
    let mut third = 0.0;
    for (x, &a) in actions.iter().enumerate() {
        let inv = dec.weight(1.0, x, a);
        let rho = dec.rho(x, a);
        second += dgp.context_prob(x) * inv * rho * dgp.reward_variance(x, a);
        let gv = g(x, a);
        third += dgp.context_prob(x) * (1.0 - dgp.mu(x, a)) * inv * rho * gv * gv;
    }
    first + second + third
}

/// Per-sample variance `n·Var[V̂_DR]` for a deterministic target.
pub fn dr_variance_deterministic_target(
    dgp: &DiscreteDgp,
    policy: &dyn StationaryPolicy,
    dec: &ErrorDecomposition,
) -> Result<f64> {
    let actions = deterministic_actions(dgp, policy)?;
    Ok(deterministic_variance(
        dgp,
        &actions,
        dec,
        |x, a| dgp.r_star(x, a) + (1.0 - dec.rho(x, a)) * dec.delta(x, a),
        |x, a| dec.delta(x, a),
    ))
}

/// Per-sample variance of IPS (`r̂ ≡ 0`) for a deterministic target.
pub fn ips_variance_deterministic_target(
    dgp: &DiscreteDgp,
    policy: &dyn StationaryPolicy,
    dec: &ErrorDecomposition,
) -> Result<f64> {
    let actions = deterministic_actions(dgp, policy)?;
    Ok(deterministic_variance(
        dgp,
        &actions,
        dec,
        |x, a| dec.rho(x, a) * dgp.r_star(x, a),
        |x, a| dgp.r_star(x, a),
    ))
}

/// Per-sample variance of DM (`μ̂ ≡ +∞`) for a deterministic target.
pub fn dm_variance_deterministic_target(
    dgp: &DiscreteDgp,
    policy: &dyn StationaryPolicy,
    dec: &ErrorDecomposition,
) -> Result<f64> {
    let actions = deterministic_actions(dgp, policy)?;
    Ok(var_x(dgp, |x| {
        let a = actions[x];
        dgp.r_star(x, a) + dec.delta(x, a)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{make_discrete_dgp, DgpSpec, TablePolicy};

    fn dgp(seed: u64, deterministic: bool) -> DiscreteDgp {
        make_discrete_dgp(&DgpSpec {
            contexts: 4,
            actions: 3,
            support: 3,
            deterministic_rewards: deterministic,
            seed,
        })
        .unwrap()
    }

    fn target() -> TablePolicy {
        TablePolicy::new(vec![
            vec![0.2, 0.5, 0.3],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.3, 0.3, 0.4],
        ])
    }

    #[test]
    fn perfect_models_give_policy_value() {
        let d = dgp(1, false);
        let dec = ErrorDecomposition::exact(&d);
        let v = crate::dgp::policy_value_exact(&d, &target());
        assert!((term_expectation_exact(&d, &target(), &dec) - v).abs() < 1e-15);
        assert_eq!(dr_bias_exact(&d, &target(), &dec, true).unwrap(), 0.0);
    }

    #[test]
    fn exact_rho_is_unbiased_for_any_reward_model() {
        let d = dgp(2, false);
        let dec =
            ErrorDecomposition::new(&d, vec![vec![0.9, 0.1, 0.5]; 4], d.exploration().to_vec())
                .unwrap();
        assert!(dr_bias_exact(&d, &target(), &dec, true).unwrap() < 1e-15);
        assert!(dr_bias_exact(&d, &target(), &dec, false).is_err());
    }

    #[test]
    fn clean_case_variance_is_context_variance() {
        let d = dgp(3, true);
        let dec = ErrorDecomposition::exact(&d);
        let parts = term_variance_decomposition(&d, &target(), &dec);
        assert_eq!(parts.reward_noise_penalty, 0.0);
        assert_eq!(parts.model_error_penalty, 0.0);
        assert_eq!(parts.correlation_reduction, 0.0);
    }

    #[test]
    fn randomized_target_is_rejected_by_deterministic_formula() {
        let d = dgp(4, false);
        let dec = ErrorDecomposition::exact(&d);
        assert!(matches!(
            dr_variance_deterministic_target(&d, &target(), &dec),
            Err(Error::Domain(_))
        ));
        let det = TablePolicy::deterministic(&[0, 1, 2, 0], 3);
        let v = dr_variance_deterministic_target(&d, &det, &dec).unwrap();
        assert!((v - term_variance_exact(&d, &det, &dec)).abs() < 1e-12);
    }

    #[test]
    fn infinite_mu_hat_has_zero_rho() {
        let d = dgp(5, false);
        let dec =
            ErrorDecomposition::new(&d, d.r_star_table(), vec![vec![f64::INFINITY; 3]; 4]).unwrap();
        assert_eq!(dec.rho(0, 0), 0.0);
        assert_eq!(dec.weight(1.0, 0, 0), 0.0);
        assert!(ErrorDecomposition::new(&d, d.r_star_table(), vec![vec![0.0; 3]; 4]).is_err());
    }
}
