//! Run manifests: one JSON document per CLI invocation recording what ran,
//! with what options, and what came out. Field order and map ordering are
//! fixed so identical runs produce byte-identical manifests.

use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize)]
pub struct ManifestOptions {
    pub seed: u64,
    pub restarts: usize,
    pub noise: String,
    pub jitter: f64,
    pub holdout: Option<f64>,
    pub bounds: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Kernel source text as requested.
    pub kernel: Option<String>,
    /// Kernel text with fitted hyperparameter values.
    pub fitted_kernel: Option<String>,
    pub dataset: String,
    pub options: ManifestOptions,
    pub lml: Option<f64>,
    pub metrics: BTreeMap<String, f64>,
    /// Artifact file names relative to the output directory.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, dataset: String, options: ManifestOptions) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            kernel: None,
            fitted_kernel: None,
            dataset,
            options,
            lml: None,
            metrics: BTreeMap::new(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n")
    }
}
