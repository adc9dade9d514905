//! Experiment driver for `ppgnn`: configuration, repeated benchmark runs,
//! robustness sweeps, homophily analysis, scaling measurements and plots.

pub mod benchmark;
pub mod config;
pub mod error;
pub mod homophily;
pub mod output;
pub mod plot;
pub mod robustness;
pub mod scaling;
pub mod stats;

pub use config::{DataSource, ExperimentConfig, Overrides};
pub use error::{CliError, Result};
