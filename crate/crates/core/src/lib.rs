//! Partial area under the top-k curve (AUTKC).
//!
//! - [`ranking`]: worst-case-tie ranks and order statistics
//! - [`metrics`]: top-k error, AUTKC, dataset ↑-metrics, metric comparison
//! - [`losses`]: AUTKC surrogate losses, top-k baselines, CE, hinge
//! - [`consistency`]: brute-force and numerical oracles for Bayes optimality
//!   and Fisher consistency
//! - [`trainer`]: synthetic ambiguous-label data and a small SGD trainer
//! - [`cli`]: the `autkc` command-line tool

pub mod error;
pub mod json;
pub mod losses;
pub mod metrics;
pub mod ranking;
pub mod rng;
pub mod consistency;
pub mod trainer;
pub mod cli;

pub use error::{Error, Result};
pub use losses::{LossFamily, LossSpec, LossValueGrad, Surrogate};
pub use metrics::{ScoredSet, TopKCurve};
pub use ranking::{CondDist, ScoreVector};
