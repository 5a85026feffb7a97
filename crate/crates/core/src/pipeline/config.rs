use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cpfem::{LoadCase, MaterialParams, SolverSettings};
use crate::error::{arg, Error, Result};
use crate::surrogate::{TrainConfig, TrunkConfig};

/// A value given inline or as a path to a JSON file holding it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Inline(T),
    File(PathBuf),
}

impl<T: Clone + for<'de> Deserialize<'de>> Source<T> {
    /// Reads file sources relative to `base`.
    pub fn resolve(&self, base: &Path) -> Result<T> {
        match self {
            Source::Inline(v) => Ok(v.clone()),
            Source::File(p) => {
                let path = if p.is_absolute() { p.clone() } else { base.join(p) };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Argument(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Argument(format!("{}: {e}", path.display())))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Sc,
    Mp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroSettings {
    /// Square grid edge in voxels.
    pub grid: usize,
    /// Inclusive grain-count range; each sample draws its own count.
    pub grains: [usize; 2],
    pub count: usize,
}

impl MicroSettings {
    pub fn validate(&self) -> Result<()> {
        if self.grid == 0 || self.grid % 4 != 0 {
            return arg(format!("grid {} must be a positive multiple of 4", self.grid));
        }
        let [lo, hi] = self.grains;
        if lo == 0 || lo > hi || hi > self.grid * self.grid {
            return arg(format!("grain range {lo}..={hi} invalid for a {0}x{0} grid", self.grid));
        }
        if self.count == 0 {
            return arg("microstructure count must be positive");
        }
        Ok(())
    }
}

fn default_workers() -> usize {
    1
}

fn default_finetune_samples() -> usize {
    20
}

/// Everything one experiment needs. `train.seed` is always overwritten by a
/// value derived from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub material: Source<MaterialParams>,
    pub load: Source<LoadCase>,
    pub micro: MicroSettings,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub train: TrainConfig,
    pub trunk: TrunkConfig,
    #[serde(default = "default_model")]
    pub model: ModelChoice,
    #[serde(default = "default_finetune_samples")]
    pub finetune_samples: usize,
    /// Sample indices whose solve is forced to fail; for exercising the
    /// failure path of dataset generation.
    #[serde(default)]
    pub inject_failures: Vec<usize>,
}

fn default_model() -> ModelChoice {
    ModelChoice::Sc
}

/// Config with every file source read in and derived seeds filled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub name: String,
    pub seed: u64,
    pub workers: usize,
    pub material: MaterialParams,
    pub load: LoadCase,
    pub micro: MicroSettings,
    pub solver: SolverSettings,
    pub train: TrainConfig,
    pub trunk: TrunkConfig,
    pub model: ModelChoice,
    pub finetune_samples: usize,
    pub inject_failures: Vec<usize>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Argument(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Argument(format!("{}: {e}", path.display())))
    }

    /// Resolves file sources against `base` and validates every section.
    pub fn resolve(&self, base: &Path) -> Result<ResolvedConfig> {
        let material = self.material.resolve(base)?;
        let load = self.load.resolve(base)?;
        material.validate()?;
        load.validate()?;
        self.micro.validate()?;
        self.trunk.validate()?;
        if self.workers == 0 {
            return arg("workers must be at least 1");
        }
        let mut train = self.train.clone();
        train.seed = derive_seed(self.seed, "train");
        train.validate()?;
        Ok(ResolvedConfig {
            name: self.name.clone(),
            seed: self.seed,
            workers: self.workers,
            material,
            load,
            micro: self.micro.clone(),
            solver: self.solver,
            train,
            trunk: self.trunk,
            model: self.model,
            finetune_samples: self.finetune_samples,
            inject_failures: self.inject_failures.clone(),
        })
    }
}

impl ResolvedConfig {
    pub fn to_experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            name: self.name.clone(),
            seed: self.seed,
            workers: self.workers,
            material: Source::Inline(self.material.clone()),
            load: Source::Inline(self.load.clone()),
            micro: self.micro.clone(),
            solver: self.solver,
            train: self.train.clone(),
            trunk: self.trunk,
            model: self.model,
            finetune_samples: self.finetune_samples,
            inject_failures: self.inject_failures.clone(),
        }
    }

    /// Writes `config.resolved.json` into `dir`.
    pub fn snapshot(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(SNAPSHOT), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, "split")
    }

    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, "init")
    }

    /// Seeds differ between experiments so that two presets sharing a
    /// top-level seed still draw different microstructures.
    pub fn micro_seed(&self, index: usize) -> u64 {
        derive_seed(self.seed, &format!("{}/micro/{index}", self.name))
    }
}

pub const SNAPSHOT: &str = "config.resolved.json";

/// First eight bytes (little endian) of sha256("<seed>:<label>").
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let d = Sha256::digest(format!("{seed}:{label}").as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_label_and_seed() {
        assert_ne!(derive_seed(1, "train"), derive_seed(1, "split"));
        assert_ne!(derive_seed(1, "train"), derive_seed(2, "train"));
        assert_eq!(derive_seed(7, "micro/3"), derive_seed(7, "micro/3"));
    }

    #[test]
    fn file_sources_resolve_relative_to_base() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("al.json"), serde_json::to_string(&MaterialParams::aluminum()).unwrap()).unwrap();
        let s: Source<MaterialParams> = serde_json::from_str("\"al.json\"").unwrap();
        assert_eq!(s.resolve(dir.path()).unwrap(), MaterialParams::aluminum());
        let missing: Source<MaterialParams> = Source::File("nope.json".into());
        assert!(matches!(missing.resolve(dir.path()), Err(Error::Argument(_))));
    }

    #[test]
    fn grid_must_divide_by_four() {
        let m = MicroSettings { grid: 10, grains: [2, 3], count: 1 };
        assert!(m.validate().is_err());
        let m = MicroSettings { grid: 8, grains: [5, 3], count: 1 };
        assert!(m.validate().is_err());
    }
}
