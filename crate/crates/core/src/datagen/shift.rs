//! Reveal/conceal logging that shifts the covariate distribution toward the
//! low end of the first principal component.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RegressionDataset;
use crate::data::{Context, LogEvent, SparseVec};
use crate::error::{Error, Result};
use crate::rng::{normal, seeded};

const MAX_ITER: usize = 200;
const TOLERANCE: f64 = 1e-10;

pub fn normal_pdf(z: f64, mean: f64, sd: f64) -> f64 {
    let t = (z - mean) / sd;
    (-0.5 * t * t).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// The fitted exploration policy plus the log of the full dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateShift {
    /// Unit-norm first principal direction.
    pub direction: Vec<f64>,
    pub projection_min: f64,
    pub projection_mean: f64,
    pub density_mean: f64,
    pub density_sd: f64,
    /// Responses are divided by this so outcomes land in `[0,1]`.
    pub response_scale: f64,
    #[serde(skip)]
    pub events: Vec<LogEvent>,
}

impl CovariateShift {
    /// Fits the principal direction and density. Fails on degenerate data.
    pub fn fit(dataset: &RegressionDataset, seed: u64) -> Result<Self> {
        let examples = &dataset.examples;
        if examples.len() < 2 {
            return Err(Error::domain("covariate shift needs at least two examples"));
        }
        let dim = examples.iter().map(|(x, _)| x.dim()).max().unwrap_or(0);
        if dim == 0 {
            return Err(Error::domain(
                "degenerate principal component: all features are zero",
            ));
        }
        let n = examples.len() as f64;
        let mut mean = vec![0.0; dim];
        for (x, _) in examples {
            x.axpy_into(1.0 / n, &mut mean);
        }
        let apply = |v: &[f64]| {
            let mv: f64 = mean.iter().zip(v).map(|(a, b)| a * b).sum();
            let mut out = vec![0.0; dim];
            let mut s = 0.0;
            for (x, _) in examples {
                let u = x.dot(v) - mv;
                s += u;
                x.axpy_into(u / n, &mut out);
            }
            out.iter_mut().zip(&mean).for_each(|(o, m)| *o -= s / n * m);
            out
        };
        let mut rng = seeded(seed);
        let mut v: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
        normalize(&mut v);
        for _ in 0..MAX_ITER {
            let mut next = apply(&v);
            if norm(&next) <= 1e-300 {
                return Err(Error::domain(
                    "degenerate principal component: features have zero variance",
                ));
            }
            normalize(&mut next);
            let change = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            v = next;
            if change < TOLERANCE {
                break;
            }
        }
        let lead = v
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let proj: Vec<f64> = examples.iter().map(|(x, _)| x.dot(&v)).collect();
        let m = proj.iter().copied().fold(f64::INFINITY, f64::min);
        let m_bar = proj.iter().sum::<f64>() / n;
        let spread = m_bar - m;
        if !(spread > 1e-12 * m_bar.abs().max(1.0)) {
            return Err(Error::domain(
                "degenerate principal component: projections are constant",
            ));
        }
        let v_max = examples.iter().map(|(_, r)| *r).fold(0.0f64, f64::max);
        let fitted = Self {
            direction: v,
            projection_min: m,
            projection_mean: m_bar,
            density_mean: m + spread / 3.0,
            density_sd: spread / 4.0,
            response_scale: if v_max > 0.0 { v_max } else { 1.0 },
            events: Vec::new(),
        };
        if let Some(i) = examples
            .iter()
            .position(|(x, _)| !(fitted.reveal_probability(x) > 0.0))
        {
            return Err(Error::domain(format!(
                "reveal probability underflows to 0 at example {i}; the data has extreme outliers along the principal direction"
            )));
        }
        Ok(fitted)
    }

    /// `μ(a=1|x) = min{φ(x·x̄), 1}`.
    pub fn reveal_probability(&self, x: &SparseVec) -> f64 {
        normal_pdf(x.dot(&self.direction), self.density_mean, self.density_sd).min(1.0)
    }

    pub fn rescaled(&self, v: f64) -> f64 {
        v / self.response_scale
    }

    /// Ground truth: mean rescaled response.
    pub fn true_mean(&self, dataset: &RegressionDataset) -> f64 {
        dataset
            .examples
            .iter()
            .map(|(_, v)| self.rescaled(*v))
            .sum::<f64>()
            / dataset.len() as f64
    }

    /// Logs the examples at `idx`; action 1 reveals the response.
    pub fn log<R: Rng + ?Sized>(
        &self,
        dataset: &RegressionDataset,
        idx: &[usize],
        rng: &mut R,
    ) -> Vec<LogEvent> {
        idx.iter()
            .map(|&i| {
                let (x, v) = &dataset.examples[i];
                let p1 = self.reveal_probability(x);
                let reveal = rng.random::<f64>() < p1;
                let (a, r, p) = if reveal {
                    (1, self.rescaled(*v), p1)
                } else {
                    (0, 0.0, 1.0 - p1)
                };
                LogEvent::new(Context::new(x.clone()), a, r.min(1.0), p)
                    .expect("valid by construction")
            })
            .collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let s = norm(v);
    v.iter_mut().for_each(|x| *x /= s);
}

/// Fits the shift and logs every example of the dataset.
pub fn covariate_shift_transform(dataset: &RegressionDataset, seed: u64) -> Result<CovariateShift> {
    let mut shift = CovariateShift::fit(dataset, seed)?;
    let idx: Vec<usize> = (0..dataset.len()).collect();
    shift.events = shift.log(dataset, &idx, &mut seeded(seed ^ 0x5eed));
    Ok(shift)
}
