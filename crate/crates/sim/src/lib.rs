//! Monte Carlo experiment harness for the entanglement authentication
//! protocol simulator: configuration, seeded trial batches with analytic
//! comparisons, report serialization, and the oracle-equality selftest.

pub mod config;
pub mod report;
pub mod runner;
pub mod selftest;

pub use config::{ConfigError, ExperimentConfig, OutputFormat};
pub use report::{ExperimentReport, Metric, MetricKind};
pub use runner::{run_experiment, size_table, sweep, SizeReport};
