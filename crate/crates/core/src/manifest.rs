//! Run manifests: provenance records for emitted artifact sets.
//!
//! A manifest pins everything needed to audit or reproduce a run: the
//! toolkit version, the master seed, a digest of the canonical
//! configuration, the root sub-seed of every named random stream, and a
//! content digest of each emitted file. Two runs of the same
//! configuration produce manifests identical in every field except the
//! creation timestamp, which [`RunManifest::matches_rerun`] ignores.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed::{self, tag};

/// Hex-encoded SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

/// One recorded output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// File name, relative to the manifest's directory.
    pub name: String,
    /// Size in bytes.
    pub bytes: u64,
    /// Hex SHA-256 of the contents.
    pub sha256: String,
}

/// Provenance record for one toolkit run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Crate version that produced the artifacts.
    pub toolkit_version: String,
    /// Creation time as Unix seconds. Not part of run identity.
    pub created_unix: u64,
    /// Master seed of the run.
    pub master_seed: u64,
    /// Hex SHA-256 of the canonical configuration text.
    pub config_sha256: String,
    /// Root sub-seed of each named random stream, for stage-level replay.
    pub stage_seeds: BTreeMap<String, u64>,
    /// Emitted files with content digests.
    pub artifacts: Vec<ArtifactRecord>,
}

/// The named random streams a run can draw from, in a stable order.
const STAGES: &[(&str, u64)] = &[
    ("bias", tag::BIAS),
    ("choice", tag::CHOICE),
    ("resample", tag::RESAMPLE),
    ("tie", tag::TIE),
    ("mcmc", tag::MCMC),
    ("power_sim", tag::POWER_SIM),
    ("fit", tag::FIT),
];

impl RunManifest {
    /// Start a manifest for a run of `master_seed` over a configuration
    /// given in canonical text form.
    pub fn new(master_seed: u64, canonical_config: &str) -> RunManifest {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let stage_seeds = STAGES
            .iter()
            .map(|&(name, stage_tag)| {
                (name.to_string(), seed::derive(master_seed, &[stage_tag]))
            })
            .collect();
        RunManifest {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
            master_seed,
            config_sha256: sha256_hex(canonical_config.as_bytes()),
            stage_seeds,
            artifacts: Vec::new(),
        }
    }

    /// Digest an emitted file and add it to the inventory under its file
    /// name.
    pub fn record_file(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
        self.artifacts.push(ArtifactRecord {
            name,
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    /// Whether `other` records a byte-identical rerun: every field equal
    /// except the creation time.
    pub fn matches_rerun(&self, other: &RunManifest) -> bool {
        self.toolkit_version == other.toolkit_version
            && self.master_seed == other.master_seed
            && self.config_sha256 == other.config_sha256
            && self.stage_seeds == other.stage_seeds
            && self.artifacts == other.artifacts
    }

    /// Pretty JSON rendering with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    /// Write the manifest as JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Read a manifest back from JSON.
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            line: e.line() as u64,
            message: e.to_string(),
        })
    }
}
