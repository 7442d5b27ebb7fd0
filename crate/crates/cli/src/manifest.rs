//! Run manifests: config, seed table and a checksummed file inventory.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    /// Files read by the command, keyed by the path as given.
    pub inputs: BTreeMap<String, FileEntry>,
    /// Paths relative to the output directory.
    pub files: BTreeMap<String, FileEntry>,
    /// Fields left out of the checksums because they record wall-clock time.
    pub unhashed_fields: Vec<String>,
    pub config: RunConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(serde_json::to_string(cfg).expect("config serializes").as_bytes())
}

/// Campaign logs carry `wall_ms`; their checksum covers every other field.
pub fn hashed_content(rel: &str, bytes: &[u8]) -> Vec<u8> {
    if !rel.ends_with(".jsonl") {
        return bytes.to_vec();
    }
    let text = String::from_utf8_lossy(bytes);
    let mut out = String::new();
    for line in text.lines() {
        match serde_json::from_str::<serde_json::Value>(line) {
            Ok(mut v) => {
                if let Some(obj) = v.as_object_mut() {
                    obj.remove("wall_ms");
                }
                out.push_str(&v.to_string());
            }
            Err(_) => out.push_str(line),
        }
        out.push('\n');
    }
    out.into_bytes()
}

pub fn file_entry(dir: &Path, rel: &str) -> Result<FileEntry, CliError> {
    let bytes = std::fs::read(dir.join(rel))?;
    Ok(FileEntry {
        sha256: sha256_hex(&hashed_content(rel, &bytes)),
        bytes: bytes.len() as u64,
    })
}

impl RunManifest {
    pub fn new(command: &str, cfg: &RunConfig, seeds: BTreeMap<String, u64>) -> Self {
        Self {
            tool: "qdml".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config_hash(cfg),
            seeds,
            inputs: BTreeMap::new(),
            files: BTreeMap::new(),
            unhashed_fields: vec!["*.jsonl: wall_ms".into()],
            config: cfg.clone(),
        }
    }

    pub fn add(&mut self, dir: &Path, rel: &str) -> Result<(), CliError> {
        self.files.insert(rel.to_string(), file_entry(dir, rel)?);
        Ok(())
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        let key = path.to_string_lossy().into_owned();
        self.inputs.insert(key.clone(), file_entry(Path::new(""), &key)?);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        qdml::io::write_json(&dir.join(MANIFEST_FILE), self)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        Ok(qdml::io::read_json(&dir.join(MANIFEST_FILE))?)
    }

    /// Files whose checksum no longer matches (missing files included).
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|(rel, e)| file_entry(dir, rel).map_or(true, |f| f != **e))
            .map(|(rel, _)| rel.clone())
            .collect()
    }
}
