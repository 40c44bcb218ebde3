//! Browser demo: three small experiments on a random enumerable DGP, exposed
//! to JavaScript as functions returning JSON.
//!
//! The target policy is greedy on a reward model whose error is a fixed
//! checkerboard offset of size `model_error`, so DM is biased by a known
//! amount while IPS and DR stay unbiased.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use dreval::dgp::{
    make_discrete_dgp, policy_value_exact, sample_log, DgpSpec, TablePolicy, TableReward,
};
use dreval::estimators::analysis::{dm_bias_exact, ErrorDecomposition};
use dreval::estimators::bounds::{finite_sample_bound, AssumptionBounds};
use dreval::estimators::{dm_estimate, dr_estimate, ips_estimate};
use dreval::nonstat::{bias_mass_exact, drns_run_rule, MultiplierRule};
use dreval::policy::{argmax, Frozen, LoggedPropensity};
use dreval::rng::derive_seed;
use dreval::stats::mean;
use dreval::{DiscreteDgp, Result};

const CONTEXTS: usize = 6;
const ACTIONS: usize = 4;

struct Setup {
    dgp: DiscreteDgp,
    reward: TableReward,
    target: TablePolicy,
    value: f64,
}

fn setup(seed: u64, model_error: f64) -> Result<Setup> {
    let dgp = make_discrete_dgp(&DgpSpec {
        contexts: CONTEXTS,
        actions: ACTIONS,
        support: 2,
        deterministic_rewards: false,
        seed,
    })?;
    let table: Vec<Vec<f64>> = dgp
        .r_star_table()
        .iter()
        .enumerate()
        .map(|(x, row)| {
            row.iter()
                .enumerate()
                .map(|(a, r)| {
                    let sign = if (x + a) % 2 == 0 { 1.0 } else { -1.0 };
                    (r + sign * model_error).clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect();
    let greedy: Vec<usize> = table.iter().map(|row| argmax(row)).collect();
    let target = TablePolicy::deterministic(&greedy, ACTIONS);
    let value = policy_value_exact(&dgp, &target);
    Ok(Setup {
        dgp,
        reward: TableReward::new(table),
        target,
        value,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodStats {
    pub method: &'static str,
    pub mean: f64,
    pub bias: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub true_value: f64,
    pub dm_bias_exact: f64,
    pub methods: Vec<MethodStats>,
}

/// DM, IPS and DR over `replicates` logs of `n` events each.
pub fn compare_estimators(
    seed: u64,
    n: usize,
    replicates: usize,
    model_error: f64,
) -> Result<Comparison> {
    let s = setup(seed, model_error)?;
    let mut est = [Vec::new(), Vec::new(), Vec::new()];
    for r in 0..replicates.max(1) {
        let log = sample_log(&s.dgp, n.max(1), derive_seed(seed, 1, r as u64));
        est[0].push(dm_estimate(&log, &s.target, &s.reward)?.estimate);
        est[1].push(ips_estimate(&log, &s.target, &LoggedPropensity)?.estimate);
        est[2].push(dr_estimate(&log, &s.target, &s.reward, &LoggedPropensity)?.estimate);
    }
    let methods = ["DM", "IPS", "DR"]
        .iter()
        .zip(&est)
        .map(|(&method, v)| {
            let m = mean(v);
            let mse = v.iter().map(|e| (e - s.value).powi(2)).sum::<f64>() / v.len() as f64;
            MethodStats {
                method,
                mean: m,
                bias: m - s.value,
                rmse: mse.sqrt(),
            }
        })
        .collect();
    let dec = ErrorDecomposition::new(
        &s.dgp,
        s.reward.table().to_vec(),
        s.dgp.exploration().to_vec(),
    )?;
    Ok(Comparison {
        true_value: s.value,
        dm_bias_exact: dm_bias_exact(&s.dgp, &s.target, &dec),
        methods,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RhoPoint {
    pub rho: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub mean_events_consumed: f64,
    pub mean_final_c: f64,
    /// Bias mass at the average final multiplier.
    pub bias_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RhoSweep {
    pub true_value: f64,
    pub points: Vec<RhoPoint>,
}

/// DR-ns at each quantile level over `streams` fresh logs.
pub fn rho_sweep(
    seed: u64,
    horizon: usize,
    rhos: &[f64],
    streams: usize,
    model_error: f64,
) -> Result<RhoSweep> {
    let s = setup(seed, model_error)?;
    let target = Frozen(s.target.clone());
    let horizon = horizon.max(1);
    let logs: Vec<_> = (0..streams.max(1))
        .map(|i| sample_log(&s.dgp, horizon * 50, derive_seed(seed, 2, i as u64)))
        .collect();
    let mut points = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let (mut est, mut used, mut cs) = (Vec::new(), Vec::new(), Vec::new());
        for (i, log) in logs.iter().enumerate() {
            let rule = MultiplierRule::Quantile { rho, c_max: 1.0 };
            let r = drns_run_rule(
                log,
                &target,
                &s.reward,
                rule,
                horizon,
                derive_seed(seed, 3, i as u64),
            )?;
            if r.success {
                est.push(r.v_avg);
                used.push(r.events_consumed as f64);
                cs.push(r.blocks.last().map_or(1.0, |b| b.c_t));
            }
        }
        let c = if cs.is_empty() { f64::NAN } else { mean(&cs) };
        let m = if est.is_empty() { f64::NAN } else { mean(&est) };
        points.push(RhoPoint {
            rho,
            mean_estimate: m,
            bias: m - s.value,
            mean_events_consumed: if used.is_empty() {
                f64::NAN
            } else {
                mean(&used)
            },
            mean_final_c: c,
            bias_mass: if c.is_finite() {
                bias_mass_exact(&s.dgp, s.target.rows(), c)
            } else {
                f64::NAN
            },
        });
    }
    Ok(RhoSweep {
        true_value: s.value,
        points,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundPoint {
    pub n: usize,
    pub bound: f64,
    pub dr_error: f64,
}

/// Finite-sample DR error bound against the error of one DR run, per `n`.
pub fn bound_curve(
    seed: u64,
    delta: f64,
    model_error: f64,
    ns: &[usize],
) -> Result<Vec<BoundPoint>> {
    let s = setup(seed, model_error)?;
    let dec = ErrorDecomposition::new(
        &s.dgp,
        s.reward.table().to_vec(),
        s.dgp.exploration().to_vec(),
    )?;
    let bounds = AssumptionBounds::from_dgp(&s.dgp, &s.target, &dec);
    ns.iter()
        .map(|&n| {
            let n = n.max(1);
            let log = sample_log(&s.dgp, n, derive_seed(seed, 4, n as u64));
            let dr = dr_estimate(&log, &s.target, &s.reward, &LoggedPropensity)?.estimate;
            Ok(BoundPoint {
                n,
                bound: finite_sample_bound(&bounds, n, delta)?,
                dr_error: (dr - s.value).abs(),
            })
        })
        .collect()
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())))
}

#[wasm_bindgen(js_name = compareEstimators)]
pub fn compare_estimators_js(
    seed: u32,
    n: u32,
    replicates: u32,
    model_error: f64,
) -> std::result::Result<String, JsValue> {
    to_js(compare_estimators(
        seed.into(),
        n as usize,
        replicates as usize,
        model_error,
    ))
}

#[wasm_bindgen(js_name = rhoSweep)]
pub fn rho_sweep_js(
    seed: u32,
    horizon: u32,
    rhos: Vec<f64>,
    streams: u32,
    model_error: f64,
) -> std::result::Result<String, JsValue> {
    to_js(rho_sweep(
        seed.into(),
        horizon as usize,
        &rhos,
        streams as usize,
        model_error,
    ))
}

#[wasm_bindgen(js_name = boundCurve)]
pub fn bound_curve_js(
    seed: u32,
    delta: f64,
    model_error: f64,
    ns: Vec<u32>,
) -> std::result::Result<String, JsValue> {
    let ns: Vec<usize> = ns.into_iter().map(|n| n as usize).collect();
    to_js(bound_curve(seed.into(), delta, model_error, &ns))
}
