//! Finite-sample deviation bounds for the doubly robust estimate.

use serde::{Deserialize, Serialize};

use super::analysis::{expect_nu, var_x, ErrorDecomposition};
use crate::dgp::DiscreteDgp;
use crate::error::{Error, Result};
use crate::policy::StationaryPolicy;

/// Range of a single term when every importance weight is at most `m`.
pub fn term_range_bound(m: f64) -> f64 {
    1.0 + m
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!(
            "confidence level delta must be in (0,1), got {delta}"
        )));
    }
    Ok(())
}

/// Freedman half-width for a mean of `n` martingale differences with range
/// `D` and summed conditional variance at most `n·V`:
/// `2·max{D·ln(2/δ)/n, sqrt(V·ln(2/δ)/n)}`.
pub fn freedman_half_width(n: usize, range: f64, variance: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if n == 0 {
        return Err(Error::domain("freedman half-width needs n >= 1"));
    }
    if !(range > 0.0) || !(variance >= 0.0) {
        return Err(Error::domain(format!(
            "need D > 0 and V >= 0, got D={range}, V={variance}"
        )));
    }
    let l = (2.0 / delta).ln();
    let n = n as f64;
    Ok(2.0 * (range * l / n).max((variance * l / n).sqrt()))
}

/// Constants of the bias/variance assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionBounds {
    /// Bound on `ν/μ̂`.
    pub m: f64,
    /// `E_ν|Δ|`.
    pub delta_delta: f64,
    /// Bound on `|1 − ρ|`.
    pub delta_rho: f64,
    pub rho_max: f64,
    /// `E_ν E_r (r̂ − r)²`.
    pub e_rhat: f64,
    /// `Var_x[r*(x,ν)]`.
    pub variance_term: f64,
}

impl AssumptionBounds {
    /// Tightest constants for a DGP; suprema range over the support of `μ`.
    pub fn from_dgp(
        dgp: &DiscreteDgp,
        policy: &dyn StationaryPolicy,
        dec: &ErrorDecomposition,
    ) -> Self {
        let nu = dgp.policy_table(policy);
        let (mut m, mut delta_rho, mut rho_max) = (0.0f64, 0.0f64, 0.0f64);
        for x in 0..dgp.num_contexts() {
            if dgp.context_prob(x) == 0.0 {
                continue;
            }
            for a in 0..dgp.num_actions() {
                m = m.max(dec.weight(nu[x][a], x, a));
                delta_rho = delta_rho.max((1.0 - dec.rho(x, a)).abs());
                rho_max = rho_max.max(dec.rho(x, a));
            }
        }
        Self {
            m,
            delta_delta: expect_nu(dgp, &nu, |x, a| dec.delta(x, a).abs()),
            delta_rho,
            rho_max,
            e_rhat: expect_nu(dgp, &nu, |x, a| {
                dgp.reward_law(x, a).mean_sq_error(dec.r_hat(x, a))
            }),
            variance_term: var_x(dgp, |x| {
                (0..dgp.num_actions())
                    .map(|a| nu[x][a] * dgp.r_star(x, a))
                    .sum()
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.m,
            self.delta_delta,
            self.delta_rho,
            self.rho_max,
            self.e_rhat,
            self.variance_term,
        ];
        if fields.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain(format!(
                "assumption constants must be finite and >= 0: {self:?}"
            )));
        }
        Ok(())
    }

    /// Limit of the bound as `n → ∞`.
    pub fn bias_bound(&self) -> f64 {
        self.delta_rho * self.delta_delta
    }

    pub fn variance_bound(&self) -> f64 {
        self.variance_term
            + 2.0 * self.delta_rho * self.delta_delta
            + self.m * self.rho_max * self.e_rhat
    }
}

/// High-probability bound on `|V̂_DR − V|`.
pub fn finite_sample_bound(bounds: &AssumptionBounds, n: usize, delta: f64) -> Result<f64> {
    bounds.validate()?;
    Ok(bounds.bias_bound()
        + freedman_half_width(
            n,
            term_range_bound(bounds.m),
            bounds.variance_bound(),
            delta,
        )?)
}

/// The same constants measured in `L_p(ν)` / `L_q(ν)` norms, `1/p + 1/q = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBounds {
    pub p: f64,
    pub q: f64,
    pub m: f64,
    /// `‖Δ‖_q`.
    pub delta_delta: f64,
    /// `‖1 − ρ‖_p`.
    pub delta_rho: f64,
    /// `‖ρ‖_p`.
    pub rho_max: f64,
    /// `‖E_r(r̂ − r)²‖_q`.
    pub e_rhat: f64,
    pub variance_term: f64,
}

pub fn check_conjugate(p: f64, q: f64) -> Result<()> {
    let ok = p >= 1.0
        && q >= 1.0
        && match (p.is_infinite(), q.is_infinite()) {
            (true, true) => false,
            (true, false) => q == 1.0,
            (false, true) => p == 1.0,
            (false, false) => (1.0 / p + 1.0 / q - 1.0).abs() <= 1e-12,
        };
    if ok {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "p={p} and q={q} are not conjugate exponents"
        )))
    }
}

/// Conjugate exponent of `p`.
pub fn conjugate(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

fn lp_norm(dgp: &DiscreteDgp, nu: &[Vec<f64>], p: f64, f: impl Fn(usize, usize) -> f64) -> f64 {
    if p.is_infinite() {
        let mut s = 0.0f64;
        for x in 0..dgp.num_contexts() {
            for a in 0..dgp.num_actions() {
                if dgp.context_prob(x) > 0.0 && nu[x][a] > 0.0 {
                    s = s.max(f(x, a).abs());
                }
            }
        }
        s
    } else {
        expect_nu(dgp, nu, |x, a| f(x, a).abs().powf(p)).powf(1.0 / p)
    }
}

impl MomentBounds {
    /// Exact norms under `ν` for a given `p`; `q` is its conjugate.
    pub fn from_dgp(
        dgp: &DiscreteDgp,
        policy: &dyn StationaryPolicy,
        dec: &ErrorDecomposition,
        p: f64,
    ) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::domain(format!("p must be >= 1, got {p}")));
        }
        let q = conjugate(p);
        let nu = dgp.policy_table(policy);
        let base = AssumptionBounds::from_dgp(dgp, policy, dec);
        Ok(Self {
            p,
            q,
            m: base.m,
            delta_delta: lp_norm(dgp, &nu, q, |x, a| dec.delta(x, a)),
            delta_rho: lp_norm(dgp, &nu, p, |x, a| 1.0 - dec.rho(x, a)),
            rho_max: lp_norm(dgp, &nu, p, |x, a| dec.rho(x, a)),
            e_rhat: lp_norm(dgp, &nu, q, |x, a| {
                dgp.reward_law(x, a).mean_sq_error(dec.r_hat(x, a))
            }),
            variance_term: base.variance_term,
        })
    }

    fn as_assumptions(&self) -> AssumptionBounds {
        AssumptionBounds {
            m: self.m,
            delta_delta: self.delta_delta,
            delta_rho: self.delta_rho,
            rho_max: self.rho_max,
            e_rhat: self.e_rhat,
            variance_term: self.variance_term,
        }
    }

    pub fn bias_bound(&self) -> f64 {
        self.delta_rho * self.delta_delta
    }
}

/// [`finite_sample_bound`] with moment-based constants.
pub fn finite_sample_bound_moments(bounds: &MomentBounds, n: usize, delta: f64) -> Result<f64> {
    check_conjugate(bounds.p, bounds.q)?;
    finite_sample_bound(&bounds.as_assumptions(), n, delta)
}
