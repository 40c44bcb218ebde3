//! L2-regularized logistic regression heads.

use serde::{Deserialize, Serialize};

use super::linalg::cholesky_solve;
use super::{LinearModel, ModelKind};
use crate::data::SparseVec;
use crate::policy::RewardModel;

/// Largest parameter count solved with Newton steps.
const NEWTON_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticOptions {
    pub l2: f64,
    pub epochs: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            epochs: 200,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct Problem<'a> {
    examples: &'a [(SparseVec, bool)],
    dim: usize,
    l2: f64,
}

impl Problem<'_> {
    fn margin(&self, theta: &[f64], x: &SparseVec) -> f64 {
        x.dot(&theta[..self.dim]) + theta[self.dim]
    }

    /// Mean log loss plus `l2/2·‖w‖²`; the intercept is not penalized.
    fn objective(&self, theta: &[f64]) -> f64 {
        let n = self.examples.len() as f64;
        let loss: f64 = self
            .examples
            .iter()
            .map(|(x, y)| {
                let z = self.margin(theta, x);
                if *y {
                    softplus(-z)
                } else {
                    softplus(z)
                }
            })
            .sum();
        loss / n + 0.5 * self.l2 * theta[..self.dim].iter().map(|w| w * w).sum::<f64>()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.examples.len() as f64;
        let mut g = vec![0.0; self.dim + 1];
        for (x, y) in self.examples {
            let r = (sigmoid(self.margin(theta, x)) - f64::from(u8::from(*y))) / n;
            x.axpy_into(r, &mut g[..self.dim]);
            g[self.dim] += r;
        }
        for (gi, w) in g.iter_mut().zip(&theta[..self.dim]) {
            *gi += self.l2 * w;
        }
        g
    }

    fn hessian(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.dim + 1;
        let n = self.examples.len() as f64;
        let mut h = vec![0.0; d * d];
        for (x, _) in self.examples {
            let p = sigmoid(self.margin(theta, x));
            let s = p * (1.0 - p) / n;
            let xb = super::with_bias(x, self.dim);
            for (i, vi) in xb.iter() {
                for (j, vj) in xb.iter() {
                    h[i as usize * d + j as usize] += s * vi * vj;
                }
            }
        }
        for i in 0..d {
            h[i * d + i] += if i < self.dim { self.l2 } else { 0.0 } + 1e-12;
        }
        h
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fits one logistic head. Small problems take damped Newton steps (up to
/// `epochs` of them); wide ones take `epochs` full-batch gradient steps of size
/// `0.5/(1+epoch)`. Deterministic.
pub fn logistic_fit(
    examples: &[(SparseVec, bool)],
    dim: usize,
    options: LogisticOptions,
) -> LinearModel {
    let mut theta = vec![0.0; dim + 1];
    if !examples.is_empty() {
        let prob = Problem {
            examples,
            dim,
            l2: options.l2.max(0.0),
        };
        if dim < NEWTON_LIMIT {
            let mut f = prob.objective(&theta);
            for _ in 0..options.epochs {
                let g = prob.gradient(&theta);
                if norm(&g) < 1e-10 {
                    break;
                }
                let Some(step) = cholesky_solve(&prob.hessian(&theta), &g) else {
                    break;
                };
                let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
                let mut t = 1.0;
                let mut accepted = false;
                while t > 1e-12 {
                    let cand: Vec<f64> = theta.iter().zip(&step).map(|(w, s)| w - t * s).collect();
                    let fc = prob.objective(&cand);
                    if fc <= f - 1e-4 * t * slope {
                        theta = cand;
                        f = fc;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
        } else {
            for epoch in 0..options.epochs {
                let g = prob.gradient(&theta);
                let eta = 0.5 / (1.0 + epoch as f64);
                theta.iter_mut().zip(&g).for_each(|(w, gi)| *w -= eta * gi);
            }
        }
    }
    let b = theta.pop().unwrap_or(0.0);
    LinearModel {
        kind: ModelKind::Logistic,
        k: 1,
        epsilon: None,
        weights: vec![theta],
        intercepts: vec![b],
    }
}

/// Loss model `l̂(x,a) = 1 − P(a correct | x)` from per-action logistic heads.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticLossModel {
    pub heads: LinearModel,
}

impl RewardModel for LogisticLossModel {
    fn predict(&self, x: &SparseVec, action: usize) -> f64 {
        1.0 - sigmoid(self.heads.score(x, action))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vec<(SparseVec, bool)> {
        (0..80)
            .map(|i| {
                let a = (i % 9) as f64 / 9.0 - 0.5;
                let b = ((i * 5) % 7) as f64 / 7.0 - 0.5;
                let noise = if i % 6 == 0 { -1.0 } else { 1.0 };
                (SparseVec::from_dense(&[a, b]), noise * (a + 0.5 * b) > 0.0)
            })
            .collect()
    }

    #[test]
    fn symmetric_data_gives_zero_model() {
        let data = vec![(SparseVec::default(), true), (SparseVec::default(), false)];
        let m = logistic_fit(&data, 3, LogisticOptions::default());
        assert!(m.weights[0].iter().all(|&w| w == 0.0));
        assert_eq!(m.intercepts[0], 0.0);
    }

    #[test]
    fn stationary_point() {
        let data = toy();
        let opts = LogisticOptions {
            l2: 0.01,
            epochs: 200,
        };
        let m = logistic_fit(&data, 2, opts);
        let prob = Problem {
            examples: &data,
            dim: 2,
            l2: 0.01,
        };
        let mut theta = m.weights[0].clone();
        theta.push(m.intercepts[0]);
        assert!(norm(&prob.gradient(&theta)) < 1e-4);
    }

    #[test]
    fn separable_fits_perfectly() {
        let data: Vec<_> = (0..20)
            .map(|i| {
                let v = i as f64 - 9.5;
                (SparseVec::from_dense(&[v, 1.0]), v > 0.0)
            })
            .collect();
        let m = logistic_fit(
            &data,
            2,
            LogisticOptions {
                l2: 1e-6,
                epochs: 200,
            },
        );
        assert!(data.iter().all(|(x, y)| (m.score(x, 0) > 0.0) == *y));
        assert!(m.validate().is_ok());
    }

    #[test]
    fn wide_problem_uses_gradient_steps() {
        let data: Vec<_> = (0..30)
            .map(|i| (SparseVec::one_hot(i * 20), i % 2 == 0))
            .collect();
        let m = logistic_fit(&data, 600, LogisticOptions::default());
        let again = logistic_fit(&data, 600, LogisticOptions::default());
        assert_eq!(m, again);
        assert!(data.iter().all(|(x, y)| (m.score(x, 0) > 0.0) == *y));
    }
}
