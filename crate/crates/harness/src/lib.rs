//! Experiment harness for `kdvol`: TOML configuration, Monte Carlo
//! sup-deviation campaigns, rate fits, dimension and bound reports, and
//! plot data.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod json;
pub mod plots;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, Mode};
pub use error::{HarnessError, Result};
pub use report::{fit_rate, Axis, DeviationReport};
pub use run::{run, simulate, RunReport};
