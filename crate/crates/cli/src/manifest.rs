//! Run manifest: configuration echo, stage timings, artifact checksums.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub outputs: Vec<ArtifactRecord>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub created_unix: u64,
    pub tool: String,
    pub config: serde_json::Value,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn new(config: serde_json::Value) -> Self {
        Manifest {
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            tool: format!("kgwe {}", env!("CARGO_PKG_VERSION")),
            config,
            stages: Vec::new(),
        }
    }

    /// Runs one stage, recording its wall time and checksumming the files
    /// it reports as outputs.
    pub fn stage<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce() -> Result<Vec<PathBuf>>,
    {
        let started = Instant::now();
        let outputs = body().with_context(|| format!("stage `{name}` failed"))?;
        let seconds = started.elapsed().as_secs_f64();
        let outputs = outputs
            .iter()
            .map(|path| checksum(path))
            .collect::<Result<Vec<_>>>()?;
        log::info!("stage {name} finished in {seconds:.3}s");
        self.stages.push(StageRecord {
            name: name.to_owned(),
            seconds,
            outputs,
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json).with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(())
    }
}

pub fn checksum(path: &Path) -> Result<ArtifactRecord> {
    let data =
        fs::read(path).with_context(|| format!("checksumming artifact {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&data);
    let mut sha256 = String::with_capacity(64);
    for byte in hasher.finalize() {
        sha256.push_str(&format!("{byte:02x}"));
    }
    Ok(ArtifactRecord {
        path: path.display().to_string(),
        bytes: data.len() as u64,
        sha256,
    })
}
