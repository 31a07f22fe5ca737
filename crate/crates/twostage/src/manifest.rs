use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const RUN_MANIFEST_FILE: &str = "manifest.json";

/// Provenance record written once per command invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub engine_version: String,
    /// sha256 of the effective configuration as JSON.
    pub config_digest: String,
    pub config: serde_json::Value,
    pub seed: u64,
    /// File name → sha256 of each input.
    pub inputs: BTreeMap<String, String>,
    /// File name → sha256 of each primary output.
    pub outputs: BTreeMap<String, String>,
    pub timings: BTreeMap<String, f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64) -> Self {
        let config = serde_json::to_value(config).expect("config serializes");
        RunManifest {
            command: command.to_string(),
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: sha256_hex(&serde_json::to_vec(&config).expect("value serializes")),
            config,
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        let digest = file_digest(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Records an output by its file name inside the output directory.
    pub fn add_output(&mut self, path: &Path) -> CliResult<()> {
        let digest = file_digest(path)?;
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.outputs.insert(name, digest);
        Ok(())
    }

    pub fn write(&self, out_dir: &Path) -> CliResult<()> {
        let path = out_dir.join(RUN_MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }
}
