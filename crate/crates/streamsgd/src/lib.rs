//! Streaming estimators for linear models: last-iterate SGD with a two-phase
//! stepsize, sparse SGD with adaptive support growth, epsilon-greedy linear
//! contextual bandits and plug-in inference for the resulting estimates.
//!
//! Every run is driven by seeded [`numerics::Rng`] substreams, so results are
//! reproducible bit for bit given `(seed, replication)`.

// Index loops read closer to the math here, and `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod inference;
pub mod numerics;
pub mod par;
pub mod record;
pub mod schedules;
pub mod sgd_dense;
pub mod sgd_sparse;

pub use error::{Error, Result};
