//! Shipped experiment definitions: four load cases, each at desk and full scale.

use super::config::{ExperimentConfig, MicroSettings, ModelChoice, Source};
use crate::cpfem::{LoadCase, MaterialParams, SolverSettings};
use crate::error::{arg, Result};
use crate::surrogate::{TrainConfig, TrunkConfig};

pub const PRESETS: [&str; 4] = ["al-tension-1pct", "cu-tension-0125pct", "al-shear-2pct", "cu-cyclic"];

/// Desk presets run 16×16 grids with the small trunk; the `-full` variants
/// use 64×64 grids, the standard trunk and the long schedules.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (base, full) = match name.strip_suffix("-full") {
        Some(b) => (b, true),
        None => (name, false),
    };
    let (material, load, full_count) = match base {
        "al-tension-1pct" => (MaterialParams::aluminum(), LoadCase::tension(0.01), 1000),
        "cu-tension-0125pct" => (MaterialParams::copper(), LoadCase::tension(0.00125), 400),
        "al-shear-2pct" => (MaterialParams::aluminum(), LoadCase::shear(0.02), 400),
        "cu-cyclic" => (MaterialParams::copper(), LoadCase::cyclic(0.00125), 186),
        _ => return arg(format!("unknown preset {name:?}; known: {}", PRESETS.join(", "))),
    };
    let mode_default = TrainConfig::default();
    let (micro, train, trunk) = if full {
        (MicroSettings { grid: 64, grains: [20, 40], count: full_count }, mode_default, TrunkConfig::standard())
    } else {
        let train = TrainConfig { epochs: 10000, finetune_epochs: 5000, ..mode_default };
        (MicroSettings { grid: 16, grains: [8, 15], count: 200 }, train, TrunkConfig::desk())
    };
    Ok(ExperimentConfig {
        name: name.to_string(),
        seed: 2024,
        workers: 1,
        material: Source::Inline(material),
        load: Source::Inline(load),
        micro,
        solver: SolverSettings::default(),
        train,
        trunk,
        model: ModelChoice::Sc,
        finetune_samples: 20,
        inject_failures: Vec::new(),
    })
}

/// All preset names including the full-scale variants.
pub fn preset_names() -> Vec<String> {
    PRESETS.iter().flat_map(|p| [p.to_string(), format!("{p}-full")]).collect()
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;
    use crate::cpfem::{LoadKind, OutputQuantity};

    #[test]
    fn every_preset_resolves() {
        for n in preset_names() {
            let r = preset(&n).unwrap().resolve(Path::new(".")).unwrap();
            assert_eq!(r.name, n);
        }
        assert!(preset("steel").is_err());
    }

    #[test]
    fn step_counts_follow_the_load_case() {
        let t = preset("al-tension-1pct").unwrap().resolve(Path::new(".")).unwrap();
        assert_eq!(t.load.n_output_steps, 50);
        assert_eq!(t.micro.grid, 16);
        let c = preset("cu-cyclic").unwrap().resolve(Path::new(".")).unwrap();
        assert_eq!((c.load.kind, c.load.n_output_steps, c.load.output_quantity), (LoadKind::Cyclic, 240, OutputQuantity::SigmaY));
        let f = preset("al-tension-1pct-full").unwrap().resolve(Path::new(".")).unwrap();
        assert_eq!((f.micro.grid, f.micro.count, f.train.epochs, f.train.finetune_epochs), (64, 1000, 80000, 20000));
    }
}
