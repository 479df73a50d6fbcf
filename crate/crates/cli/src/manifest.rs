use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance record written next to every data file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// SHA-256 of the compact, key-sorted JSON form of `config`.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<String>,
    pub wall_time_seconds: f64,
}

impl RunManifest {
    pub fn new<C: Serialize>(
        argv: &[String],
        config: &C,
        seed: Option<u64>,
        outputs: &[&Path],
        wall: Duration,
    ) -> anyhow::Result<Self> {
        let config = serde_json::to_value(config)?;
        Ok(Self {
            command_line: argv.to_vec(),
            config_hash: config_hash(&serde_json::to_vec(&config)?),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            wall_time_seconds: wall.as_secs_f64(),
        })
    }

    pub fn write_for(&self, data_file: &Path) -> anyhow::Result<PathBuf> {
        let path = manifest_path(data_file);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

pub fn config_hash(canonical: &[u8]) -> String {
    hex::encode(Sha256::digest(canonical))
}

/// `results/bench.csv` → `results/bench.manifest.json`.
pub fn manifest_path(data_file: &Path) -> PathBuf {
    let stem = data_file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".to_owned());
    data_file.with_file_name(format!("{stem}.manifest.json"))
}
