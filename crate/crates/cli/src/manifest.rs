//! Run manifest: what each stage was run with and what it wrote.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub params: Value,
    /// Checksums of the files the stage read.
    pub inputs: BTreeMap<String, String>,
    /// Checksums of the files the stage wrote, by name in the run directory.
    pub outputs: BTreeMap<String, String>,
    /// Stage-specific values later stages need.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub data: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            tool: concat!("railalign ", env!("CARGO_PKG_VERSION")).into(),
            stages: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Freshness {
    Missing,
    Fresh,
    Stale(String),
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

/// Writes through a temporary sibling so readers never see half a file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| CliError::parse(&path, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&dir.join(MANIFEST), text.as_bytes())
    }

    /// Whether `stage`'s recorded outputs can be consumed under the current
    /// parameters and inputs.
    pub fn freshness(
        &self,
        dir: &Path,
        stage: &str,
        params: &Value,
        inputs: &BTreeMap<String, String>,
    ) -> Result<Freshness, CliError> {
        let Some(rec) = self.stages.get(stage) else {
            return Ok(Freshness::Missing);
        };
        if rec.outputs.keys().any(|name| !dir.join(name).exists()) {
            return Ok(Freshness::Missing);
        }
        if &rec.params != params {
            return Ok(Freshness::Stale(format!("{stage} outputs were made with different parameters")));
        }
        if &rec.inputs != inputs {
            return Ok(Freshness::Stale(format!("{stage} inputs changed since its outputs were made")));
        }
        for (name, sum) in &rec.outputs {
            if &sha256_file(&dir.join(name))? != sum {
                return Ok(Freshness::Stale(format!("{name} does not match its manifest checksum")));
            }
        }
        Ok(Freshness::Fresh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sha256_of_abc() {
        assert_eq!(
            sha256_bytes(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn freshness_tracks_params_inputs_and_outputs() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(&dir.path().join("a.txt"), b"one").unwrap();
        let inputs: BTreeMap<String, String> = [("input".to_string(), "x".to_string())].into();
        let mut m = Manifest::default();
        let params = json!({"k": 1});
        assert_eq!(m.freshness(dir.path(), "s", &params, &inputs).unwrap(), Freshness::Missing);
        m.stages.insert(
            "s".into(),
            StageRecord {
                params: params.clone(),
                inputs: inputs.clone(),
                outputs: [("a.txt".to_string(), sha256_bytes(b"one"))].into(),
                data: Value::Null,
            },
        );
        m.save(dir.path()).unwrap();
        let m = Manifest::load(dir.path()).unwrap();
        assert_eq!(m.freshness(dir.path(), "s", &params, &inputs).unwrap(), Freshness::Fresh);
        assert!(matches!(m.freshness(dir.path(), "s", &json!({"k": 2}), &inputs).unwrap(), Freshness::Stale(_)));
        assert!(matches!(m.freshness(dir.path(), "s", &params, &BTreeMap::new()).unwrap(), Freshness::Stale(_)));
        std::fs::write(dir.path().join("a.txt"), b"two").unwrap();
        assert!(matches!(m.freshness(dir.path(), "s", &params, &inputs).unwrap(), Freshness::Stale(_)));
        std::fs::remove_file(dir.path().join("a.txt")).unwrap();
        assert_eq!(m.freshness(dir.path(), "s", &params, &inputs).unwrap(), Freshness::Missing);
    }
}
