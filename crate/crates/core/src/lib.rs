//! Doubly robust off-policy evaluation for contextual bandit logs.
//!
//! The crate covers the stationary estimators (direct method, inverse
//! propensity scoring, doubly robust) with their exact single-term analysis and
//! finite-sample bounds, the DR-ns replay evaluator for history-dependent
//! policies, the data constructions used to benchmark them, and the learners
//! those benchmarks train.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod datagen;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod learn;
pub mod log;
pub mod nonstat;
pub mod policy;
pub mod rng;
pub mod stats;

pub use data::{Context, HiddenPayload, LogEvent, OutcomeMode, SparseVec};
pub use dgp::{DiscreteDgp, RewardLaw};
pub use error::{Error, Result};
pub use policy::{NonstationaryPolicy, PropensityModel, RewardModel, StationaryPolicy};
