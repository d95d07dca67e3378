//! Experiment harness: configuration, estimator dispatch, scoring and sweeps.

pub mod cli;
pub mod config;
pub mod estimate;
pub mod score;
pub mod sweep;
