//! Ridge regression with an unpenalized intercept.

use super::linalg::{cholesky_solve, conjugate_gradient};
use super::{LinearModel, ModelKind};
use crate::data::{LogEvent, SparseVec};
use crate::error::{Error, Result};
use crate::policy::{clamp01, RewardModel};

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1.0;

/// Largest dimension solved through the explicit normal equations.
const DENSE_LIMIT: usize = 512;

/// Minimizes `Σ(w·x + b − y)² + λ‖w‖²`, returning a single-head model.
pub fn ridge_fit(examples: &[(SparseVec, f64)], lambda: f64) -> Result<LinearModel> {
    if examples.is_empty() {
        return Err(Error::domain("ridge regression needs at least one example"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!(
            "ridge lambda must be positive, got {lambda}"
        )));
    }
    let dim = examples.iter().map(|(x, _)| x.dim()).max().unwrap_or(0);
    let n = examples.len() as f64;
    let mut x_mean = vec![0.0; dim];
    let mut y_mean = 0.0;
    for (x, y) in examples {
        x.axpy_into(1.0 / n, &mut x_mean);
        y_mean += y / n;
    }
    // rhs = Xᵀ(y − ȳ), which already equals X_cᵀ y_c
    let mut rhs = vec![0.0; dim];
    for (x, y) in examples {
        x.axpy_into(y - y_mean, &mut rhs);
    }
    let w = if dim == 0 {
        Vec::new()
    } else if dim <= DENSE_LIMIT {
        let mut gram = vec![0.0; dim * dim];
        for (x, _) in examples {
            for (i, vi) in x.iter() {
                for (j, vj) in x.iter() {
                    gram[i as usize * dim + j as usize] += vi * vj;
                }
            }
        }
        for i in 0..dim {
            for j in 0..dim {
                gram[i * dim + j] -= n * x_mean[i] * x_mean[j];
            }
            gram[i * dim + i] += lambda;
        }
        cholesky_solve(&gram, &rhs)
            .ok_or_else(|| Error::domain("ridge normal equations are not positive definite"))?
    } else {
        let apply = |v: &[f64], out: &mut [f64]| {
            let mv: f64 = x_mean.iter().zip(v).map(|(a, b)| a * b).sum();
            out.iter_mut().zip(v).for_each(|(o, vi)| *o = lambda * vi);
            let mut s = 0.0;
            for (x, _) in examples {
                let u = x.dot(v) - mv;
                s += u;
                x.axpy_into(u, out);
            }
            out.iter_mut().zip(&x_mean).for_each(|(o, m)| *o -= s * m);
        };
        conjugate_gradient(apply, &rhs, 1e-8, 10 * dim + 100)
    };
    let b = y_mean - w.iter().zip(&x_mean).map(|(a, m)| a * m).sum::<f64>();
    let model = LinearModel {
        kind: ModelKind::Ridge,
        k: 1,
        epsilon: None,
        weights: vec![w],
        intercepts: vec![b],
    };
    model.validate()?;
    Ok(model)
}

/// One ridge head per action, predictions clamped to `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRewardModel {
    pub model: LinearModel,
}

impl RewardModel for LinearRewardModel {
    fn predict(&self, x: &SparseVec, action: usize) -> f64 {
        clamp01(self.model.score(x, action))
    }
}

/// Fits head `a` on the events that logged action `a`. Actions never logged
/// predict the global outcome mean.
pub fn fit_reward_model_per_action(
    events: &[LogEvent],
    k: usize,
    lambda: f64,
) -> Result<LinearRewardModel> {
    if events.is_empty() {
        return Err(Error::domain("reward model needs at least one event"));
    }
    let global = events.iter().map(|e| e.outcome).sum::<f64>() / events.len() as f64;
    let dim = events.iter().map(|e| e.features().dim()).max().unwrap_or(0);
    let mut model = LinearModel::zeros(ModelKind::Ridge, k, dim);
    for a in 0..k {
        let data: Vec<(SparseVec, f64)> = events
            .iter()
            .filter(|e| e.action == a)
            .map(|e| (e.features().clone(), e.outcome))
            .collect();
        if data.is_empty() {
            model.intercepts[a] = global;
            continue;
        }
        let head = ridge_fit(&data, lambda)?;
        let w = &head.weights[0];
        model.weights[a][..w.len()].copy_from_slice(w);
        model.intercepts[a] = head.intercepts[0];
    }
    Ok(LinearRewardModel { model })
}
