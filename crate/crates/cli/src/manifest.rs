use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex_digest;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_sha256: String,
    pub seed: u64,
    pub files: Vec<FileEntry>,
    /// Wall-clock seconds; the only field that differs between identical runs.
    pub elapsed_s: f64,
}

/// Record of everything the stages wrote into one output directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub library_version: String,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_file(path: &Path) -> CliResult<(String, u64)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok((hex_digest(Sha256::digest(&bytes).as_slice()), bytes.len() as u64))
}

impl RunManifest {
    pub fn load_or_new(out: &Path) -> CliResult<Self> {
        let path = out.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                library_version: catsim_version(),
                stages: BTreeMap::new(),
            });
        }
        Self::load(out)
    }

    pub fn load(out: &Path) -> CliResult<Self> {
        let path = out.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(&path, e))
    }

    pub fn save(&self, out: &Path) -> CliResult<()> {
        let path = out.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }

    /// Replaces the record for `stage`, hashing `files` (relative paths).
    pub fn record(
        &mut self,
        out: &Path,
        stage: &str,
        config_sha256: String,
        seed: u64,
        mut files: Vec<PathBuf>,
        elapsed_s: f64,
    ) -> CliResult<()> {
        files.sort();
        let files = files
            .into_iter()
            .map(|rel| {
                let (sha256, bytes) = sha256_file(&out.join(&rel))?;
                Ok(FileEntry {
                    path: rel_string(&rel),
                    sha256,
                    bytes,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        self.stages.insert(
            stage.to_string(),
            StageRecord {
                config_sha256,
                seed,
                files,
                elapsed_s,
            },
        );
        Ok(())
    }

    /// Files that are missing or whose contents no longer match.
    pub fn verify(&self, out: &Path) -> Vec<String> {
        let mut bad = Vec::new();
        for record in self.stages.values() {
            for entry in &record.files {
                match sha256_file(&out.join(&entry.path)) {
                    Ok((sha, _)) if sha == entry.sha256 => {}
                    Ok(_) => bad.push(format!("{} (checksum mismatch)", entry.path)),
                    Err(_) => bad.push(format!("{} (missing)", entry.path)),
                }
            }
        }
        bad
    }

    /// The manifest with timings zeroed, for run-to-run comparison.
    pub fn without_timings(&self) -> Self {
        let mut m = self.clone();
        for r in m.stages.values_mut() {
            r.elapsed_s = 0.0;
        }
        m
    }
}

fn catsim_version() -> String {
    // Both crates share the workspace version.
    env!("CARGO_PKG_VERSION").to_string()
}

pub(crate) fn rel_string(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}
