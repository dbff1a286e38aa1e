//! Configuration, batch running and output writing behind the
//! `lla-evidence` binary.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod select;

pub use config::{parse, ConfigError, EstimatorKind, EstimatorSettings, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use runner::{run_experiment, Aggregate, RunRecord, Summary};
