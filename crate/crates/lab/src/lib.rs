//! Experiment runner for the `weightlab-core` toolkit.
//!
//! An [`ExperimentConfig`](config::ExperimentConfig) names one experiment;
//! [`run_experiment`](experiments::run_experiment) evaluates it and returns an
//! [`Outcome`](experiments::Outcome) that serializes to JSON, CSV and a short
//! text summary. The inequality chains live in [`chains`], the power-weight
//! sweep in [`sweep`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chains;
pub mod config;
pub mod experiments;
pub mod report;
pub mod sweep;

pub use config::{ConfigError, ExperimentConfig};
pub use experiments::{run_experiment, write_artifacts, Outcome, EXPERIMENTS};
pub use report::{ChainReport, ChainRow, Relation};
