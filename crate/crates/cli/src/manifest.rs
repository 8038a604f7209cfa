use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Posterior draw bookkeeping of sign and narrative identification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationCounts {
    pub draws: usize,
    pub accepted_sign: usize,
    pub accepted_narrative: usize,
    pub ambiguous: usize,
    pub covariance_redraws: usize,
}

/// Provenance of one run. Timings vary between runs; everything else is a
/// function of the configuration and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the effective configuration as canonical JSON.
    pub config_hash: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub versions: BTreeMap<String, String>,
    pub stages: Vec<StageTiming>,
    pub identification: Option<IdentificationCounts>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn config_hash(config: &RunConfig) -> String {
    hex::encode(Sha256::digest(config.canonical_json().as_bytes()))
}

impl RunManifest {
    pub fn new(config: &RunConfig, threads: Option<usize>) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("statelp-cli".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("statelp".into(), statelp::VERSION.into());
        Self {
            config_hash: config_hash(config),
            seed: config.seed,
            threads,
            versions,
            stages: Vec::new(),
            identification: None,
            outputs: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn record_stage(&mut self, stage: &str, seconds: f64) {
        self.stages.push(StageTiming {
            stage: stage.into(),
            seconds,
        });
    }
}
