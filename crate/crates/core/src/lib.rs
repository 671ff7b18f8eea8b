//! Adaptive EMA-type first-order (FEMA) and zeroth-order (ZEMA) stochastic
//! subgradient methods for weakly convex composite problems, with Moreau
//! envelope stationarity diagnostics and an experiment harness.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accumulators;
pub mod cli;
pub mod error;
pub mod harness;
pub mod moreau;
pub mod numeric;
pub mod optimizers;
pub mod problems;
pub mod regularizer;
pub mod rng;
pub mod zoo;

pub use error::{Error, Result};
