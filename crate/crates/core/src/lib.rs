//! Multi-objective simulated annealing with archive re-seeding, steered by a
//! probability-matching hyper-heuristic over four re-seed rules.

pub mod annealer;
pub mod error;
pub mod faultid;
pub mod harness;
pub mod hyperheuristic;
pub mod metrics;
pub mod parallel;
pub mod pareto;
pub mod problems;

pub use error::{Error, Result};
