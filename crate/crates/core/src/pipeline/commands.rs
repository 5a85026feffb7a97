use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, ModelChoice, ResolvedConfig};
use super::manifest::{
    read_manifest, sha256_hex, write_manifest, Artifact, BasisManifest, DatasetManifest, MicroEntry, MicroManifest,
    PredictionManifest, Provenance, ReportManifest, SampleEntry, WeightsManifest,
};
use crate::basis::{generate_basis, BasisSet};
use crate::cpfem::{simulate, ResponseCurve};
use crate::error::{Error, Result};
use crate::eval::{curve_bundle_csv, evaluate_curves, Evaluation, MetricsReport, Timing};
use crate::micro::{generate_microstructure, load_grid, save_grid, Microstructure};
use crate::surrogate::{
    finetune_sc, loss_csv, mp_inputs, normalized_grid, predict_mp, predict_sc, read_descriptor, split_indices, train_mp,
    train_sc, Dataset, LossRecord, ModelKind, MpDeepOnet, Prediction, ScDeepOnet, ScalerPerStep, TrainReport,
};

pub const BASIS_FILE: &str = "basis.csv";
pub const WEIGHTS_FILE: &str = "weights.pcsw";
pub const LOSS_FILE: &str = "loss.csv";
pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";
pub const SAMPLES_DIR: &str = "samples";

/// Process exit status for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Manifest(_) => 4,
        Error::Numerical(_) | Error::Simulation(_) | Error::Undefined(_) => 3,
        _ => 2,
    }
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn prepare(out: &Path, cfg: Option<&ResolvedConfig>) -> Result<()> {
    std::fs::create_dir_all(out)?;
    if let Some(c) = cfg {
        c.snapshot(out)?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

/// Writes `count` seeded Voronoi microstructures as `rve_NNNN.pmic`.
pub fn gen_micro(cfg: &ResolvedConfig, out: &Path) -> Result<MicroManifest> {
    prepare(out, Some(cfg))?;
    let m = &cfg.micro;
    let mut samples = Vec::with_capacity(m.count);
    for i in 0..m.count {
        let seed = cfg.micro_seed(i);
        let grains = ChaCha8Rng::seed_from_u64(derive_seed(seed, "grains")).gen_range(m.grains[0]..=m.grains[1]);
        let micro = generate_microstructure(seed, m.grid, m.grid, grains)?;
        let file = format!("rve_{i:04}.pmic");
        save_grid(&micro, &out.join(&file))?;
        samples.push(MicroEntry { file, seed, grains });
    }
    let manifest = MicroManifest { artifact: Artifact::Microstructures, seed: cfg.seed, grid: m.grid, samples };
    write_manifest(out, &manifest)?;
    log::info!("wrote {} microstructures to {}", m.count, out.display());
    Ok(manifest)
}

/// `.pmic` files named by `path`: the file itself, or every one in the
/// directory in name order. Names are file stems.
pub fn list_micro(path: &Path) -> Result<Vec<(String, Microstructure)>> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "pmic"))
            .collect();
        v.sort();
        v
    } else if path.is_file() {
        vec![path.to_path_buf()]
    } else {
        return Err(Error::Argument(format!("{} does not exist", path.display())));
    };
    if files.is_empty() {
        return Err(Error::Argument(format!("no .pmic files in {}", path.display())));
    }
    files
        .iter()
        .map(|f| {
            let name = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, load_grid(f)?))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetTiming {
    pub seconds: Vec<Option<f64>>,
    pub mean_seconds: Option<f64>,
}

/// Runs CP-FE on every microstructure. Failed solves are logged and flagged
/// in the manifest; the command fails only when nothing succeeded.
pub fn run_cp(cfg: &ResolvedConfig, micro: &Path, out: &Path) -> Result<DatasetManifest> {
    let inputs = list_micro(micro)?;
    let (h, w) = (inputs[0].1.height, inputs[0].1.width);
    if let Some((n, _)) = inputs.iter().find(|(_, m)| (m.height, m.width) != (h, w)) {
        return Err(Error::Argument(format!("{n} is not {h}x{w} like the first microstructure")));
    }
    prepare(out, Some(cfg))?;
    let sdir = out.join(SAMPLES_DIR);
    std::fs::create_dir_all(&sdir)?;
    let results = with_pool(cfg.workers, || {
        inputs
            .par_iter()
            .enumerate()
            .map(|(i, (_, m))| {
                let mut settings = cfg.solver;
                if cfg.inject_failures.contains(&i) {
                    settings.local.max_iterations = 0;
                }
                simulate(&m.orientation_field(), &cfg.material, &cfg.load, &settings)
            })
            .collect::<Vec<_>>()
    })?;
    let mut samples = Vec::with_capacity(inputs.len());
    let mut seconds = Vec::with_capacity(inputs.len());
    for ((name, m), r) in inputs.iter().zip(results) {
        let micro_file = format!("{SAMPLES_DIR}/{name}.pmic");
        save_grid(m, &out.join(&micro_file))?;
        match r {
            Ok(sim) => {
                let curve_file = format!("{SAMPLES_DIR}/{name}.csv");
                sim.curve.save_csv(&out.join(&curve_file))?;
                seconds.push(Some(sim.stats.wall_seconds));
                samples.push(SampleEntry { name: name.clone(), micro: micro_file, curve: Some(curve_file), failed: false, error: None });
            }
            Err(e) => {
                log::warn!("{name}: {e}");
                seconds.push(None);
                samples.push(SampleEntry { name: name.clone(), micro: micro_file, curve: None, failed: true, error: Some(e.to_string()) });
            }
        }
    }
    let done: Vec<f64> = seconds.iter().flatten().copied().collect();
    let mean_seconds = (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64);
    write_json(&out.join(TIMING_FILE), &DatasetTiming { seconds, mean_seconds })?;
    let manifest = DatasetManifest {
        artifact: Artifact::Dataset,
        provenance: Provenance::of(&cfg.material, &cfg.load)?,
        material: cfg.material.clone(),
        load: cfg.load.clone(),
        mesh: [h, w],
        solver: cfg.solver,
        samples,
    };
    write_manifest(out, &manifest)?;
    let failed = manifest.failures();
    log::info!("{} of {} simulations succeeded", manifest.samples.len() - failed, manifest.samples.len());
    if failed == manifest.samples.len() {
        return Err(Error::Simulation(format!("all {failed} simulations failed")));
    }
    Ok(manifest)
}

/// The successful samples of a dataset directory.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub manifest: DatasetManifest,
    pub sha256: String,
    pub names: Vec<String>,
    pub micros: Vec<Microstructure>,
    pub curves: Vec<ResponseCurve>,
    pub fe_seconds_per_case: Option<f64>,
}

impl LoadedDataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let (manifest, sha256): (DatasetManifest, String) = read_manifest(dir, Artifact::Dataset)?;
        let (mut names, mut micros, mut curves) = (Vec::new(), Vec::new(), Vec::new());
        for s in manifest.samples.iter().filter(|s| !s.failed) {
            let curve = s.curve.as_ref().ok_or_else(|| Error::Manifest(format!("{} has no curve", s.name)))?;
            names.push(s.name.clone());
            micros.push(load_grid(&dir.join(&s.micro))?);
            curves.push(ResponseCurve::load_csv(&dir.join(curve))?);
        }
        if names.is_empty() {
            return Err(Error::Argument(format!("{} holds no successful samples", dir.display())));
        }
        let fe_seconds_per_case = std::fs::read_to_string(dir.join(TIMING_FILE))
            .ok()
            .and_then(|t| serde_json::from_str::<DatasetTiming>(&t).ok())
            .and_then(|t| t.mean_seconds);
        Ok(Self { manifest, sha256, names, micros, curves, fe_seconds_per_case })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn dataset(&self, idx: &[usize]) -> Result<Dataset> {
        let micros: Vec<Microstructure> = idx.iter().map(|&i| self.micros[i].clone()).collect();
        let curves: Vec<ResponseCurve> = idx.iter().map(|&i| self.curves[i].clone()).collect();
        Dataset::from_pairs(&micros, &curves)
    }

    pub fn indices_of(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.names.iter().position(|m| m == n).ok_or_else(|| Error::Manifest(format!("sample {n} missing from dataset")))
            })
            .collect()
    }

    pub fn mp_inputs(&self) -> Vec<f64> {
        mp_inputs(&self.manifest.material, &self.manifest.load)
    }
}

/// Simulates the 36 single crystals for the configured material and load.
pub fn gen_basis(cfg: &ResolvedConfig, out: &Path) -> Result<BasisManifest> {
    prepare(out, Some(cfg))?;
    let basis = with_pool(cfg.workers, || generate_basis(&cfg.material, &cfg.load, &cfg.solver))??;
    basis.save(&out.join(BASIS_FILE))?;
    let manifest = BasisManifest {
        artifact: Artifact::Basis,
        provenance: Provenance::of(&cfg.material, &cfg.load)?,
        material: cfg.material.clone(),
        load: cfg.load.clone(),
        solver: cfg.solver,
        file: BASIS_FILE.into(),
    };
    write_manifest(out, &manifest)?;
    Ok(manifest)
}

#[derive(Clone, Debug)]
pub struct LoadedBasis {
    pub basis: BasisSet,
    pub manifest: BasisManifest,
    pub sha256: String,
}

impl LoadedBasis {
    pub fn load(dir: &Path) -> Result<Self> {
        let (manifest, sha256): (BasisManifest, String) = read_manifest(dir, Artifact::Basis)?;
        let basis = BasisSet::load(&dir.join(&manifest.file))?;
        if Provenance::of(&basis.material, &basis.load)? != manifest.provenance {
            return Err(Error::Manifest(format!("{} does not match its manifest", manifest.file)));
        }
        Ok(Self { basis, manifest, sha256 })
    }
}

/// A trained model of either kind.
#[derive(Clone, Debug)]
pub enum Model {
    Sc(ScDeepOnet),
    Mp(MpDeepOnet),
}

impl Model {
    pub fn load(path: &Path) -> Result<Self> {
        match read_descriptor(path)?.kind {
            ModelKind::Sc => Ok(Model::Sc(ScDeepOnet::load(path)?)),
            ModelKind::Mp => Ok(Model::Mp(MpDeepOnet::load(path)?)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            Model::Sc(m) => m.save(path),
            Model::Mp(m) => m.save(path),
        }
    }

    pub fn choice(&self) -> ModelChoice {
        match self {
            Model::Sc(_) => ModelChoice::Sc,
            Model::Mp(_) => ModelChoice::Mp,
        }
    }

    /// Predicts curves in MPa; MP models take the nine inputs of `mp_row`.
    pub fn predict(&self, grids: &[Vec<f64>], h: usize, w: usize, basis: &BasisSet, mp_row: &[f64]) -> Result<Prediction> {
        let scaler = ScalerPerStep::from_basis(basis)?;
        match self {
            Model::Sc(m) => predict_sc(m, grids, h, w, basis, &scaler),
            Model::Mp(m) => predict_mp(m, grids, h, w, &vec![mp_row.to_vec(); grids.len()], &scaler),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentileCase {
    pub percentile: f64,
    pub sample: String,
}

/// Metrics of one model on one set of named samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: Vec<String>,
    pub metrics: MetricsReport,
    pub percentile_cases: Vec<PercentileCase>,
}

impl EvalReport {
    /// The report with timing removed, for run-to-run comparison.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.metrics.timing = None;
        r
    }
}

fn evaluate_on(model: &Model, ds: &LoadedDataset, idx: &[usize], basis: &BasisSet) -> Result<(EvalReport, Evaluation, Vec<Vec<f64>>)> {
    let data = ds.dataset(idx)?;
    let p = model.predict(&data.grids, data.height, data.width, basis, &ds.mp_inputs())?;
    let timing = ds.fe_seconds_per_case.map(|fe| Timing::new(fe, p.seconds_per_case));
    let ev = evaluate_curves(&data.targets, &p.stresses, timing)?;
    let names: Vec<String> = idx.iter().map(|&i| ds.names[i].clone()).collect();
    let report = EvalReport {
        samples: names.clone(),
        metrics: ev.report.clone(),
        percentile_cases: ev.percentile_cases.iter().map(|&(p, c)| PercentileCase { percentile: p, sample: names[c].clone() }).collect(),
    };
    Ok((report, ev, p.stresses))
}

fn write_evaluation(out: &Path, prefix: &str, ev: &Evaluation, times: &[f64], fe: &[Vec<f64>], pred: &[Vec<f64>]) -> Result<()> {
    std::fs::write(out.join(format!("{prefix}histogram.csv")), ev.histogram.to_csv())?;
    std::fs::write(out.join(format!("{prefix}curves.csv")), curve_bundle_csv(ev, times, fe, pred))?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub samples: usize,
    pub final_loss: Option<f64>,
    pub wall_seconds: f64,
}

impl From<&TrainReport> for TrainingSummary {
    fn from(r: &TrainReport) -> Self {
        Self { epochs: r.epochs, samples: r.samples, final_loss: r.final_loss, wall_seconds: r.wall_seconds }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub manifest: WeightsManifest,
    pub history: Vec<LossRecord>,
    pub training: TrainingSummary,
    pub report: EvalReport,
}

fn save_weights(out: &Path, model: &Model) -> Result<String> {
    let path = out.join(WEIGHTS_FILE);
    model.save(&path)?;
    Ok(sha256_hex(&std::fs::read(&path)?))
}

/// Baseline training on a seeded split, then evaluation on the held-out part.
pub fn train_cmd(cfg: &ResolvedConfig, dataset: &Path, basis: &Path, out: &Path) -> Result<TrainOutcome> {
    let ds = LoadedDataset::load(dataset)?;
    let lb = LoadedBasis::load(basis)?;
    ds.manifest.provenance.require_same(&lb.manifest.provenance, "dataset", "basis")?;
    if ds.len() < 2 {
        return Err(Error::Argument("training needs at least two samples".into()));
    }
    prepare(out, Some(cfg))?;
    let (tr, te) = split_indices(ds.len(), cfg.train.train_fraction, cfg.split_seed())?;
    if tr.is_empty() || te.is_empty() {
        return Err(Error::Argument(format!("split of {} samples leaves an empty side", ds.len())));
    }
    let data = ds.dataset(&tr)?;
    let (model, report) = match cfg.model {
        ModelChoice::Sc => {
            let mut m = ScDeepOnet::new(cfg.trunk, cfg.init_seed())?;
            let r = train_sc(&mut m, &data, &lb.basis, &cfg.train)?;
            (Model::Sc(m), r)
        }
        ModelChoice::Mp => {
            let mut m = MpDeepOnet::new(cfg.trunk, lb.basis.n_steps(), cfg.init_seed())?;
            let scaler = ScalerPerStep::from_basis(&lb.basis)?;
            let rows = vec![ds.mp_inputs(); data.len()];
            let r = train_mp(&mut m, &data, &rows, &scaler, &cfg.train)?;
            (Model::Mp(m), r)
        }
    };
    std::fs::write(out.join(LOSS_FILE), loss_csv(&report.history))?;
    let weights_sha256 = save_weights(out, &model)?;
    let (eval_report, ev, pred) = evaluate_on(&model, &ds, &te, &lb.basis)?;
    let fe: Vec<Vec<f64>> = te.iter().map(|&i| ds.curves[i].stresses.clone()).collect();
    write_evaluation(out, "", &ev, &lb.basis.times, &fe, &pred)?;
    write_json(&out.join(REPORT_FILE), &eval_report)?;
    let training = TrainingSummary::from(&report);
    write_json(&out.join("training.json"), &training)?;
    let manifest = WeightsManifest {
        artifact: Artifact::Weights,
        model: model.choice(),
        provenance: ds.manifest.provenance.clone(),
        dataset_sha256: ds.sha256.clone(),
        basis_sha256: lb.sha256.clone(),
        parent_weights_sha256: None,
        train: cfg.train.clone(),
        train_samples: tr.iter().map(|&i| ds.names[i].clone()).collect(),
        test_samples: te.iter().map(|&i| ds.names[i].clone()).collect(),
        weights_file: WEIGHTS_FILE.into(),
        weights_sha256,
        loss_file: LOSS_FILE.into(),
    };
    write_manifest(out, &manifest)?;
    log::info!(
        "held-out relative error {:.3}%, R2 {:.4}",
        eval_report.metrics.mean_relative_error_pct,
        eval_report.metrics.r2
    );
    Ok(TrainOutcome { manifest, history: report.history, training, report: eval_report })
}

/// Loads weights through their manifest, checking the file hash.
pub fn load_weights(dir: &Path) -> Result<(Model, WeightsManifest, String)> {
    let (manifest, sha): (WeightsManifest, String) = read_manifest(dir, Artifact::Weights)?;
    let path = dir.join(&manifest.weights_file);
    let actual = sha256_hex(&std::fs::read(&path)?);
    if actual != manifest.weights_sha256 {
        return Err(Error::Manifest(format!("{} changed since its manifest was written", path.display())));
    }
    let model = Model::load(&path)?;
    if model.choice() != manifest.model {
        return Err(Error::Manifest("weights file and manifest disagree on the model kind".into()));
    }
    Ok((model, manifest, sha))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FinetuneReport {
    pub pre: EvalReport,
    pub post: EvalReport,
}

#[derive(Clone, Debug)]
pub struct FinetuneOutcome {
    pub manifest: WeightsManifest,
    pub history: Vec<LossRecord>,
    pub report: FinetuneReport,
}

/// Transfer learning: `samples` curves of the new dataset fine-tune the
/// branch of an SC model, the rest measure error before and after.
pub fn finetune_cmd(cfg: &ResolvedConfig, weights: &Path, dataset: &Path, basis: &Path, samples: usize, out: &Path) -> Result<FinetuneOutcome> {
    let (model, parent, _) = load_weights(weights)?;
    let Model::Sc(mut sc) = model else {
        return Err(Error::Argument("transfer learning is implemented for SC models only".into()));
    };
    let ds = LoadedDataset::load(dataset)?;
    let lb = LoadedBasis::load(basis)?;
    ds.manifest.provenance.require_same(&lb.manifest.provenance, "dataset", "basis")?;
    if samples == 0 || samples >= ds.len() {
        return Err(Error::Argument(format!("need 1..{} fine-tuning samples, got {samples}", ds.len())));
    }
    prepare(out, Some(cfg))?;
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.split_seed()));
    let te = idx.split_off(samples);
    let tr = idx;
    let before = Model::Sc(sc.clone());
    let (pre, ..) = evaluate_on(&before, &ds, &te, &lb.basis)?;
    let report = finetune_sc(&mut sc, &ds.dataset(&tr)?, &lb.basis, &cfg.train)?;
    let model = Model::Sc(sc);
    std::fs::write(out.join(LOSS_FILE), loss_csv(&report.history))?;
    let weights_sha256 = save_weights(out, &model)?;
    let (post, ev, pred) = evaluate_on(&model, &ds, &te, &lb.basis)?;
    let fe: Vec<Vec<f64>> = te.iter().map(|&i| ds.curves[i].stresses.clone()).collect();
    write_evaluation(out, "", &ev, &lb.basis.times, &fe, &pred)?;
    let ft = FinetuneReport { pre, post };
    write_json(&out.join(REPORT_FILE), &ft)?;
    write_json(&out.join("training.json"), &TrainingSummary::from(&report))?;
    let manifest = WeightsManifest {
        artifact: Artifact::Weights,
        model: ModelChoice::Sc,
        provenance: ds.manifest.provenance.clone(),
        dataset_sha256: ds.sha256.clone(),
        basis_sha256: lb.sha256.clone(),
        parent_weights_sha256: Some(parent.weights_sha256),
        train: cfg.train.clone(),
        train_samples: tr.iter().map(|&i| ds.names[i].clone()).collect(),
        test_samples: te.iter().map(|&i| ds.names[i].clone()).collect(),
        weights_file: WEIGHTS_FILE.into(),
        weights_sha256,
        loss_file: LOSS_FILE.into(),
    };
    write_manifest(out, &manifest)?;
    log::info!(
        "relative error {:.3}% before, {:.3}% after fine-tuning on {samples} samples",
        ft.pre.metrics.mean_relative_error_pct,
        ft.post.metrics.mean_relative_error_pct
    );
    Ok(FinetuneOutcome { manifest, history: report.history, report: ft })
}

fn check_weights_basis(w: &WeightsManifest, b: &LoadedBasis, zero_shot: bool) -> Result<()> {
    if zero_shot {
        return Ok(());
    }
    w.provenance.require_same(&b.manifest.provenance, "weights", "basis").map_err(|e| match e {
        Error::Manifest(m) => Error::Manifest(format!("{m}; pass --zero-shot to apply the model across materials or loads")),
        other => other,
    })
}

/// One predicted curve CSV per microstructure.
pub fn predict_cmd(weights: &Path, basis: &Path, micro: &Path, out: &Path, zero_shot: bool) -> Result<PredictionManifest> {
    let (model, wm, wsha) = load_weights(weights)?;
    let lb = LoadedBasis::load(basis)?;
    check_weights_basis(&wm, &lb, zero_shot)?;
    let inputs = list_micro(micro)?;
    let (h, w) = (inputs[0].1.height, inputs[0].1.width);
    let grids = inputs
        .iter()
        .map(|(n, m)| {
            if (m.height, m.width) != (h, w) {
                return Err(Error::Argument(format!("{n} is not {h}x{w}")));
            }
            normalized_grid(m)
        })
        .collect::<Result<Vec<_>>>()?;
    prepare(out, None)?;
    let row = mp_inputs(&lb.basis.material, &lb.basis.load);
    let p = model.predict(&grids, h, w, &lb.basis, &row)?;
    let mut files = Vec::with_capacity(inputs.len());
    for ((name, _), s) in inputs.iter().zip(p.stresses) {
        let curve = ResponseCurve::new(lb.basis.times.clone(), lb.basis.strains.clone(), s)?;
        let file = format!("{name}.csv");
        curve.save_csv(&out.join(&file))?;
        files.push(file);
    }
    let manifest = PredictionManifest { artifact: Artifact::Predictions, basis_sha256: lb.sha256, weights_sha256: wsha, files };
    write_manifest(out, &manifest)?;
    log::info!("{:.3e} s per case", p.seconds_per_case);
    Ok(manifest)
}

/// Metrics of a model against a dataset. When the weights were trained on
/// this very dataset and basis, only their held-out samples are scored.
pub fn evaluate_cmd(weights: &Path, dataset: &Path, basis: &Path, out: &Path, zero_shot: bool) -> Result<EvalReport> {
    let (model, wm, wsha) = load_weights(weights)?;
    let ds = LoadedDataset::load(dataset)?;
    let lb = LoadedBasis::load(basis)?;
    ds.manifest.provenance.require_same(&lb.manifest.provenance, "dataset", "basis")?;
    check_weights_basis(&wm, &lb, zero_shot)?;
    let idx = if wm.dataset_sha256 == ds.sha256 && wm.basis_sha256 == lb.sha256 {
        ds.indices_of(&wm.test_samples)?
    } else {
        (0..ds.len()).collect()
    };
    prepare(out, None)?;
    let (report, ev, pred) = evaluate_on(&model, &ds, &idx, &lb.basis)?;
    let fe: Vec<Vec<f64>> = idx.iter().map(|&i| ds.curves[i].stresses.clone()).collect();
    write_evaluation(out, "", &ev, &lb.basis.times, &fe, &pred)?;
    write_json(&out.join(REPORT_FILE), &report)?;
    let manifest = ReportManifest {
        artifact: Artifact::Report,
        provenance: ds.manifest.provenance.clone(),
        dataset_sha256: ds.sha256,
        basis_sha256: lb.sha256,
        weights_sha256: wsha,
        evaluated_samples: report.samples.clone(),
    };
    write_manifest(out, &manifest)?;
    Ok(report)
}
