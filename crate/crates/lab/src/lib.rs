//! Experiment runner for online target discovery: configuration, multi-seed
//! orchestration, CSV metrics and final-window comparisons.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod runner;

pub use config::{Experiment, ExperimentConfig, Overrides};
pub use error::{LabError, LabResult};
pub use metrics::MetricsRow;
pub use runner::{run, RunSummary};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 1;
    /// `run`: every seed diverged at least once.
    pub const DIVERGED: i32 = 2;
    /// `compare`: the candidate did not beat the baseline.
    pub const NOT_BETTER: i32 = 3;
    /// I/O or numerical failure during a run.
    pub const RUNTIME: i32 = 4;
}
