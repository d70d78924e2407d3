//! Experiment runner and checkpoint analysis built on `speedlimit-core`.
//!
//! Experiments are described by TOML files (see [`config`]) and write
//! tab-separated plot data plus a JSON summary. Training runs from other
//! frameworks are read through the archive format in [`archive`].

pub mod analysis;
pub mod archive;
pub mod config;
pub mod error;
pub mod plot;
pub mod run;

pub use config::{Experiment, ExperimentConfig, Kind};
pub use error::{HarnessError, Result};
pub use run::{run_experiment, RunOutput};
