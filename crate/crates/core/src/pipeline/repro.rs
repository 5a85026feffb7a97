use std::path::Path;

use serde::{Deserialize, Serialize};

use super::commands::{finetune_cmd, gen_basis, gen_micro, run_cp, train_cmd, EvalReport, FinetuneReport};
use super::config::{ExperimentConfig, ResolvedConfig};
use super::presets::preset;
use crate::error::Result;

/// Optional overrides applied to every preset a scenario touches.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub count: Option<usize>,
    pub epochs: Option<usize>,
    pub finetune_epochs: Option<usize>,
    pub finetune_samples: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(w) = self.workers {
            c.workers = w;
        }
        if let Some(n) = self.count {
            c.micro.count = n;
        }
        if let Some(e) = self.epochs {
            c.train.epochs = e;
        }
        if let Some(e) = self.finetune_epochs {
            c.train.finetune_epochs = e;
        }
        if let Some(n) = self.finetune_samples {
            c.finetune_samples = n;
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReproSummary {
    pub scenario: String,
    pub baseline: EvalReport,
    pub transfer: Option<FinetuneReport>,
}

fn resolved(name: &str, o: &Overrides) -> Result<ResolvedConfig> {
    let mut c = preset(name)?;
    o.apply(&mut c);
    c.resolve(Path::new("."))
}

fn produce(cfg: &ResolvedConfig, root: &Path) -> Result<()> {
    gen_micro(cfg, &root.join("micro"))?;
    run_cp(cfg, &root.join("micro"), &root.join("dataset"))?;
    gen_basis(cfg, &root.join("basis"))?;
    Ok(())
}

/// Runs a preset end to end. Aluminum tension trains from scratch; every
/// other scenario first trains that baseline and then fine-tunes it.
pub fn repro(scenario: &str, overrides: &Overrides, out: &Path) -> Result<ReproSummary> {
    let full = scenario.ends_with("-full");
    let base_name = if full { "al-tension-1pct-full" } else { "al-tension-1pct" };
    let target = resolved(scenario, overrides)?;
    let base = resolved(base_name, overrides)?;
    let broot = out.join(base_name);
    produce(&base, &broot)?;
    let trained = train_cmd(&base, &broot.join("dataset"), &broot.join("basis"), &broot.join("train"))?;
    let transfer = if scenario == base_name {
        None
    } else {
        let troot = out.join(scenario);
        produce(&target, &troot)?;
        let ft = finetune_cmd(
            &target,
            &broot.join("train"),
            &troot.join("dataset"),
            &troot.join("basis"),
            target.finetune_samples,
            &troot.join("finetune"),
        )?;
        Some(ft.report)
    };
    let summary = ReproSummary { scenario: scenario.to_string(), baseline: trained.report, transfer };
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}
