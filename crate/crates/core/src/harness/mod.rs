//! Experiment configuration, result files, run manifests, the acceptance
//! suite and the command-line front end.

pub mod cli;
pub mod config;
pub mod export;
pub mod manifest;
pub mod reference;
pub mod verify;

pub use cli::cli_main;
pub use config::{load_config, Experiment, ExperimentConfig};
pub use export::{export_measure, export_record, Format};
pub use manifest::RunManifest;
pub use verify::{Suite, SuiteReport};
