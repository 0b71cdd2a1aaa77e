//! Experiment orchestration behind the `d2d-relay` binary.

pub mod config;
pub mod experiment;
mod plot;

pub use config::{Experiment, Kind, Overrides};
pub use experiment::{region_points, run_experiment, Outcome, SummaryRow};
