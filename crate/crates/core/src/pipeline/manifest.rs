//! Artifact manifests and the content-hash chain linking them.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ModelChoice;
use crate::cpfem::{LoadCase, MaterialParams, SolverSettings};
use crate::error::{Error, Result};
use crate::surrogate::TrainConfig;

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the compact JSON form of a value.
pub fn json_sha256<T: Serialize>(v: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(v)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    Microstructures,
    Dataset,
    Basis,
    Weights,
    Predictions,
    Report,
}

/// Identity of the material and load an artifact was produced for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub material_sha256: String,
    pub load_sha256: String,
}

impl Provenance {
    pub fn of(material: &MaterialParams, load: &LoadCase) -> Result<Self> {
        Ok(Self { material_sha256: json_sha256(material)?, load_sha256: json_sha256(load)? })
    }

    /// Refuses with an explanation naming both sides when they differ.
    pub fn require_same(&self, other: &Provenance, what: &str, other_what: &str) -> Result<()> {
        let mut diffs = Vec::new();
        if self.material_sha256 != other.material_sha256 {
            diffs.push(format!("material {} vs {}", short(&self.material_sha256), short(&other.material_sha256)));
        }
        if self.load_sha256 != other.load_sha256 {
            diffs.push(format!("load {} vs {}", short(&self.load_sha256), short(&other.load_sha256)));
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(Error::Manifest(format!("{what} and {other_what} were produced for different inputs: {}", diffs.join(", "))))
        }
    }
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroEntry {
    pub file: String,
    pub seed: u64,
    pub grains: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroManifest {
    pub artifact: Artifact,
    pub seed: u64,
    pub grid: usize,
    pub samples: Vec<MicroEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub name: String,
    pub micro: String,
    pub curve: Option<String>,
    pub failed: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub artifact: Artifact,
    pub provenance: Provenance,
    pub material: MaterialParams,
    pub load: LoadCase,
    pub mesh: [usize; 2],
    pub solver: SolverSettings,
    pub samples: Vec<SampleEntry>,
}

impl DatasetManifest {
    pub fn failures(&self) -> usize {
        self.samples.iter().filter(|s| s.failed).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisManifest {
    pub artifact: Artifact,
    pub provenance: Provenance,
    pub material: MaterialParams,
    pub load: LoadCase,
    pub solver: SolverSettings,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsManifest {
    pub artifact: Artifact,
    pub model: ModelChoice,
    /// Material and load of the data the weights were last fitted to.
    pub provenance: Provenance,
    pub dataset_sha256: String,
    pub basis_sha256: String,
    pub parent_weights_sha256: Option<String>,
    pub train: TrainConfig,
    pub train_samples: Vec<String>,
    pub test_samples: Vec<String>,
    pub weights_file: String,
    pub weights_sha256: String,
    pub loss_file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub artifact: Artifact,
    pub provenance: Provenance,
    pub dataset_sha256: String,
    pub basis_sha256: String,
    pub weights_sha256: String,
    pub evaluated_samples: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionManifest {
    pub artifact: Artifact,
    pub basis_sha256: String,
    pub weights_sha256: String,
    pub files: Vec<String>,
}

/// Writes `manifest.json` into `dir` and returns the hash of its bytes.
pub fn write_manifest<T: Serialize>(dir: &Path, m: &T) -> Result<String> {
    let text = serde_json::to_string_pretty(m)? + "\n";
    std::fs::write(dir.join(MANIFEST), &text)?;
    Ok(sha256_hex(text.as_bytes()))
}

/// Reads `dir/manifest.json`, checking its artifact kind. Returns the
/// manifest and the hash of its bytes.
pub fn read_manifest<T: DeserializeOwned>(dir: &Path, expect: Artifact) -> Result<(T, String)> {
    let path = dir.join(MANIFEST);
    let bytes = std::fs::read(&path)
        .map_err(|e| Error::Manifest(format!("cannot read {}: {e}", path.display())))?;
    #[derive(Deserialize)]
    struct Kind {
        artifact: Artifact,
    }
    let kind: Kind = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    if kind.artifact != expect {
        return Err(Error::Manifest(format!(
            "{} describes {:?}, expected {:?}",
            path.display(),
            kind.artifact,
            expect
        )));
    }
    let m = serde_json::from_slice(&bytes).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    Ok((m, sha256_hex(&bytes)))
}
