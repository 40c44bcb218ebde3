//! The progressive validation policy of a completed DR-ns run.
//!
//! `π_PV(a|x) = Σ_t (c_t|B(t)|/C)·π(a|x, h_{t−1})`: pick a block with
//! probability proportional to its weight in the normalizer, then act as the
//! target would have at the start of that block. Its value concentrates
//! around the run's average estimate `V_avg`.

use rand::Rng;

use super::DrnsTrace;
use crate::data::SparseVec;
use crate::error::{Error, Result};
use crate::estimators::freedman_half_width;
use crate::policy::{NonstationaryPolicy, StationaryPolicy};
use crate::rng::categorical;

pub struct ProgressiveValidationPolicy<'a, P: NonstationaryPolicy> {
    target: &'a P,
    snapshots: Vec<P::State>,
    weights: Vec<f64>,
}

impl<'a, P: NonstationaryPolicy> ProgressiveValidationPolicy<'a, P> {
    pub fn new(target: &'a P, trace: DrnsTrace<P::State>) -> Result<Self> {
        let r = &trace.result;
        if !r.success {
            return Err(Error::domain(
                "progressive validation needs a successful run",
            ));
        }
        if trace.snapshots.len() != r.blocks.len() {
            return Err(Error::domain("run was not traced with per-block snapshots"));
        }
        let mut weights: Vec<f64> = r
            .blocks
            .iter()
            .map(|b| b.c_t * b.size as f64 / r.normalizer)
            .collect();
        // absorb rounding into the last weight so the in-order sum is exactly 1
        let last = weights.len() - 1;
        for _ in 0..8 {
            let total: f64 = weights.iter().sum();
            if total == 1.0 {
                break;
            }
            weights[last] += 1.0 - total;
        }
        Ok(Self {
            target,
            snapshots: trace.snapshots,
            weights,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Draws an action by first drawing a block, then querying the target.
    pub fn sample_action<R: Rng + ?Sized>(&self, rng: &mut R, x: &SparseVec) -> usize {
        let t = categorical(rng, &self.weights);
        categorical(rng, &self.target.distribution(x, &self.snapshots[t]))
    }
}

impl<P> StationaryPolicy for ProgressiveValidationPolicy<'_, P>
where
    P: NonstationaryPolicy,
    P::State: Sync,
{
    fn num_actions(&self) -> usize {
        self.target.num_actions()
    }

    fn distribution(&self, x: &SparseVec) -> Vec<f64> {
        let mut out = vec![0.0; self.target.num_actions()];
        for (w, s) in self.weights.iter().zip(&self.snapshots) {
            for (o, p) in out.iter_mut().zip(self.target.distribution(x, s)) {
                *o += w * p;
            }
        }
        out
    }
}

/// Deviation bound between `V_avg` and the value of `π_PV`:
/// `(N·c_max/C)·2·max{(1+M)ln(2/δ)/N, sqrt((v_r + M·e_r̂)ln(2/δ)/N)}`.
pub fn pv_deviation_bound(
    events: usize,
    c_max: f64,
    normalizer: f64,
    m: f64,
    v_r: f64,
    e_rhat: f64,
    delta: f64,
) -> Result<f64> {
    if !(normalizer > 0.0) {
        return Err(Error::domain("normalizer C must be positive"));
    }
    let width = freedman_half_width(events, 1.0 + m, v_r + m * e_rhat, delta)?;
    Ok(events as f64 * c_max / normalizer * width)
}
