//! Trace-driven experiments for online VNF scaling.
//!
//! - [`trace`]: rate traces (CSV ingestion, peak normalization, PMR rescaling)
//!   and a seeded synthetic generator.
//! - [`baselines`]: static peak provisioning.
//! - [`runner`]: runs an algorithm over a trace for a list of seeds, checks
//!   invariants slot by slot and records costs, digests and timings.
//! - [`report`]: JSON and CSV output plus summary collection.
//! - [`scenarios`]: the bundled firewall/IDS/LB/NAT configurations.

pub mod baselines;
pub mod error;
pub mod report;
pub mod runner;
pub mod scenarios;
pub mod trace;

pub use error::{Error, Result};
pub use runner::{run, Algorithm, ExperimentSpec, RunOptions, RunResult, Violation};
pub use trace::{SyntheticTrace, TraceSeries};
