use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SCHEMA_VERSION};
use super::export;
use crate::error::Result;
use crate::seed::trial_seed;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to rerun a command and reproduce its outputs. Only
/// the timestamps differ between reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: String,
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub seed_derivation: String,
    pub trial_seeds: Vec<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(command: &str, config: &ExperimentConfig, trials: usize) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: config.hash(),
            config: config.clone(),
            master_seed: config.seed,
            seed_derivation: "trial i uses splitmix64(master + (i + 1) * 0x9E3779B97F4A7C15); \
                ChaCha8 streams 0 matchings, 1 noise, 2 probe, 3 chain, 4 init"
                .to_string(),
            trial_seeds: (0..trials as u64).map(|i| trial_seed(config.seed, i)).collect(),
            started_unix: unix_now(),
            finished_unix: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn finish(mut self, dir: impl AsRef<Path>) -> Result<Self> {
        self.finished_unix = unix_now();
        export::write_json("manifest", &self, dir.as_ref().join(MANIFEST_FILE))?;
        Ok(self)
    }
}
