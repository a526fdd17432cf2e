//! Experiment harness for the `rdd-core` exploration bonuses: statistical
//! verification, toy traces, training runs, occupancy densities and
//! ablations, driven by `key = value` configs and the `rdd` CLI.

pub mod calibrate;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod mc;
pub mod metrics;
pub mod output;
pub mod pool;
pub mod setup;

pub use config::{Command, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use manifest::RunManifest;
pub use mc::{mc_oracle, McEstimate};
pub use metrics::MetricsRow;
