//! Synthetic stand-ins for the benchmark datasets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MulticlassDataset, MultilabelDataset, RegressionDataset};
use crate::data::SparseVec;
use crate::error::{Error, Result};
use crate::rng::{normal, seeded};

/// Each class owns two Gaussian clusters at `±center`, so per-action losses
/// are not linear in the features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MulticlassSpec {
    pub n: usize,
    pub dim: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// Norm of each class center.
    pub separation: f64,
    /// Cluster standard deviation.
    pub noise: f64,
    /// Probability of the `+center` cluster.
    pub major_side: f64,
}

impl Default for MulticlassSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            dim: 5,
            k: 4,
            separation: 2.0,
            noise: 0.7,
            major_side: 0.75,
        }
    }
}

fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

pub fn synthetic_multiclass(spec: &MulticlassSpec, seed: u64) -> Result<MulticlassDataset> {
    if spec.n == 0 || spec.dim == 0 || spec.k == 0 {
        return Err(Error::domain("synthetic multiclass needs n, dim, K >= 1"));
    }
    if !(0.0..=1.0).contains(&spec.major_side) || !(spec.noise >= 0.0) {
        return Err(Error::domain("major_side must be in [0,1] and noise >= 0"));
    }
    let mut rng = seeded(seed);
    let centers: Vec<Vec<f64>> = (0..spec.k)
        .map(|_| unit_vector(&mut rng, spec.dim))
        .collect();
    let examples = (0..spec.n)
        .map(|_| {
            let y = rng.random_range(0..spec.k);
            let side = if rng.random::<f64>() < spec.major_side {
                1.0
            } else {
                -1.0
            };
            let x: Vec<f64> = centers[y]
                .iter()
                .map(|c| side * spec.separation * c + spec.noise * normal(&mut rng))
                .collect();
            (SparseVec::from_dense(&x), y)
        })
        .collect();
    MulticlassDataset::new(spec.k, examples)
}

/// Labels come from thresholded scores `w_a·x + q·(x_j² − 1) + noise`, whose
/// quadratic part a linear model cannot capture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultilabelSpec {
    pub n: usize,
    pub dim: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub curvature: f64,
    pub noise: f64,
    pub threshold: f64,
}

impl Default for MultilabelSpec {
    fn default() -> Self {
        Self {
            n: 40_000,
            dim: 6,
            k: 4,
            curvature: 0.8,
            noise: 0.5,
            threshold: 0.8,
        }
    }
}

pub fn synthetic_multilabel(spec: &MultilabelSpec, seed: u64) -> Result<MultilabelDataset> {
    if spec.n == 0 || spec.dim == 0 || spec.k < 2 {
        return Err(Error::domain(
            "synthetic multilabel needs n, dim >= 1 and K >= 2",
        ));
    }
    let mut rng = seeded(seed);
    let w: Vec<Vec<f64>> = (0..spec.k)
        .map(|_| unit_vector(&mut rng, spec.dim))
        .collect();
    let examples = (0..spec.n)
        .map(|_| {
            let x: Vec<f64> = (0..spec.dim).map(|_| normal(&mut rng)).collect();
            let z: Vec<f64> = (0..spec.k)
                .map(|a| {
                    let lin: f64 = w[a].iter().zip(&x).map(|(wi, xi)| wi * xi).sum();
                    let xj = x[a % spec.dim];
                    lin + spec.curvature * (xj * xj - 1.0) + spec.noise * normal(&mut rng)
                })
                .collect();
            let mut y: Vec<usize> = (0..spec.k).filter(|&a| z[a] > spec.threshold).collect();
            if y.is_empty() {
                y.push(crate::policy::argmax(&z));
            }
            (SparseVec::from_dense(&x), y)
        })
        .collect();
    MultilabelDataset::new(spec.k, examples)
}

/// Nonnegative features in `[0,1]` and a response linear in them plus noise,
/// truncated at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionSpec {
    pub n: usize,
    pub dim: usize,
    pub base: f64,
    pub slope: f64,
    pub noise: f64,
    /// Latent factor is `1 - u^skew`; larger values push mass toward the top.
    pub skew: f64,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        Self {
            n: 100_000,
            dim: 8,
            base: 5.0,
            slope: 30.0,
            noise: 3.0,
            skew: 20.0,
        }
    }
}

pub fn synthetic_regression(spec: &RegressionSpec, seed: u64) -> Result<RegressionDataset> {
    if spec.n == 0 || spec.dim == 0 {
        return Err(Error::domain("synthetic regression needs n, dim >= 1"));
    }
    if !(spec.skew > 0.0) {
        return Err(Error::domain("synthetic regression needs skew > 0"));
    }
    let mut rng = seeded(seed);
    let w: Vec<f64> = (0..spec.dim)
        .map(|_| rng.random::<f64>() / spec.dim as f64)
        .collect();
    // a shared latent factor gives the features a dominant principal direction
    let examples = (0..spec.n)
        .map(|_| {
            let g = 1.0 - rng.random::<f64>().powf(spec.skew);
            let x: Vec<f64> = (0..spec.dim)
                .map(|_| (0.7 * g + 0.3 * rng.random::<f64>()).clamp(0.0, 1.0))
                .collect();
            let lin: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
            let v = (spec.base + spec.slope * lin + spec.noise * normal(&mut rng)).max(0.0);
            (SparseVec::from_dense(&x), v)
        })
        .collect();
    RegressionDataset::new(examples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seed_deterministic() {
        let a = synthetic_multiclass(
            &MulticlassSpec {
                n: 50,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        assert_eq!(
            a,
            synthetic_multiclass(
                &MulticlassSpec {
                    n: 50,
                    ..Default::default()
                },
                3
            )
            .unwrap()
        );
        assert_ne!(
            a,
            synthetic_multiclass(
                &MulticlassSpec {
                    n: 50,
                    ..Default::default()
                },
                4
            )
            .unwrap()
        );
        let m = synthetic_multilabel(
            &MultilabelSpec {
                n: 50,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        assert!(m.examples.iter().all(|(_, y)| !y.is_empty()));
        let r = synthetic_regression(
            &RegressionSpec {
                n: 50,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        assert!(r.examples.iter().all(|(_, v)| *v >= 0.0));
        assert_eq!(
            r,
            synthetic_regression(
                &RegressionSpec {
                    n: 50,
                    ..Default::default()
                },
                3
            )
            .unwrap()
        );
    }
}
