//! Monte Carlo harness for the matching-rate experiments: configuration, trial
//! definitions, rate tables and their CSV/JSON outputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod selftest;
pub mod stats;

pub use config::{Experiment, ExperimentConfig, SamplerConfig, SolverConfig};
pub use error::{LabError, LabResult};
pub use experiments::{run, RunOutput};
pub use stats::{RateTable, Summary, TrialRecord};
