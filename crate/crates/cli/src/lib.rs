//! Experiment driver: JSON configuration, disorder-averaged runs and
//! byte-stable CSV output.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;

pub use config::{ExperimentConfig, Mode};
pub use error::{CliError, CliResult};
pub use experiments::{Artifacts, Runner, SweepRow, ValueKind, CSV_HEADER};
