//! Experiment driver for spin-bath runs: configuration files, metric time
//! series, LDOS and relaxation fits, and oracle validation.

pub mod analysis;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod run;
pub mod validate;

pub use config::RunConfig;
pub use error::CliError;
pub use run::{run, RunOptions, RunSummary};
