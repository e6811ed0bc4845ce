//! Configuration, orchestration and reporting for the `af` experiments.

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod verify;

pub use config::{parse_config, resolve, worker_count, Experiment, ExperimentConfig, RawConfig, RawMinimize};
pub use error::{CliError, EXIT_CONFIG, EXIT_FAILURE, EXIT_OK};
pub use run::{run, RunOutcome};
