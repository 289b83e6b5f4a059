//! Run manifests: every primary output embeds the deterministic description
//! of the invocation that produced it (command, parameters, seeds, library
//! version, input digests). The wall-clock timestamp lives only in the
//! standalone manifest file and honors SOURCE_DATE_EPOCH so archived runs
//! can be reproduced byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub seeds: BTreeMap<String, u64>,
    pub version: String,
    pub input_digests: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            seeds: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_digests: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn seed(mut self, key: &str, value: u64) -> Self {
        self.seeds.insert(key.to_string(), value);
        self
    }

    pub fn digest_input(mut self, path: &Path) -> resvar::Result<Self> {
        let bytes = std::fs::read(path)?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let hex: String = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        self.input_digests.insert(path.display().to_string(), hex);
        Ok(self)
    }

    /// Write the full manifest (with timestamp) to `path`.
    pub fn write_full(&self, path: &Path) -> resvar::Result<()> {
        #[derive(Serialize)]
        struct FullManifest<'a> {
            #[serde(flatten)]
            base: &'a RunManifest,
            timestamp: u64,
        }
        let timestamp = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or_else(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        let full = FullManifest {
            base: self,
            timestamp,
        };
        std::fs::write(path, serde_json::to_string_pretty(&full)?)?;
        Ok(())
    }
}
