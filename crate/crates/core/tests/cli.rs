use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use tempfile::TempDir;
use xtalnet::cpfem::{LoadCase, LoadKind, MaterialParams, OutputQuantity, ResponseCurve};
use xtalnet::pipeline::{
    self, exit_code, read_manifest, Artifact, DatasetManifest, ExperimentConfig, MicroManifest, PredictionManifest,
    ResolvedConfig, Source, WeightsManifest,
};
use xtalnet::surrogate::TrunkConfig;
use xtalnet::Error;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_xtalnet"));
    c.env("RUST_LOG", "warn");
    c
}

fn tiny(name: &str, load: LoadCase, count: usize) -> ExperimentConfig {
    let mut c = pipeline::preset("al-tension-1pct").unwrap();
    c.name = name.into();
    c.seed = 11;
    c.load = Source::Inline(load);
    c.micro.grid = 4;
    c.micro.grains = [2, 4];
    c.micro.count = count;
    c.trunk = TrunkConfig { widths: [2, 2, 3], hidden: 16 };
    c.train.epochs = 30;
    c.train.finetune_epochs = 20;
    c
}

fn resolve(c: &ExperimentConfig) -> ResolvedConfig {
    c.resolve(Path::new(".")).unwrap()
}

/// One small tension dataset, basis and trained model shared by the tests.
struct Fixture {
    dir: TempDir,
    cfg: ResolvedConfig,
}

impl Fixture {
    fn path(&self, p: &str) -> PathBuf {
        self.dir.path().join(p)
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = resolve(&tiny("fixture", LoadCase::tension(0.01), 26));
        pipeline::gen_micro(&cfg, &dir.path().join("micro")).unwrap();
        pipeline::run_cp(&cfg, &dir.path().join("micro"), &dir.path().join("dataset")).unwrap();
        pipeline::gen_basis(&cfg, &dir.path().join("basis")).unwrap();
        pipeline::train_cmd(&cfg, &dir.path().join("dataset"), &dir.path().join("basis"), &dir.path().join("train")).unwrap();
        Fixture { dir, cfg }
    })
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn gen_micro_writes_count_files_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = resolve(&tiny("three", LoadCase::tension(0.01), 3));
    let m = pipeline::gen_micro(&cfg, &dir.path().join("a")).unwrap();
    assert_eq!(m.samples.len(), 3);
    let pmics = std::fs::read_dir(dir.path().join("a")).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pmic")
    });
    assert_eq!(pmics.count(), 3);
    let (back, _): (MicroManifest, _) = read_manifest(&dir.path().join("a"), Artifact::Microstructures).unwrap();
    assert_eq!(back.samples.len(), 3);
    assert!(dir.path().join("a").join(pipeline::SNAPSHOT).is_file());
    pipeline::gen_micro(&cfg, &dir.path().join("b")).unwrap();
    for f in ["rve_0000.pmic", "rve_0001.pmic", "rve_0002.pmic", "manifest.json"] {
        assert_eq!(read(&dir.path().join("a").join(f)), read(&dir.path().join("b").join(f)), "{f}");
    }
    for e in &m.samples {
        assert!((2..=4).contains(&e.grains));
    }
}

#[test]
fn gen_micro_cli_flags_and_invalid_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let s = bin()
        .args(["gen-micro", "--seed", "3", "--grid", "8", "--grains", "3-5", "--count", "2", "--out-dir"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(s.success());
    let (m, _): (MicroManifest, _) = read_manifest(&out, Artifact::Microstructures).unwrap();
    assert_eq!((m.seed, m.grid, m.samples.len()), (3, 8, 2));

    let o = bin().args(["gen-micro", "--grid", "10", "--count", "1", "--out-dir"]).arg(dir.path().join("x")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid 10"));
}

#[test]
fn run_cp_records_injected_failure_and_keeps_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny("fault", LoadCase::tension(0.01), 3);
    c.inject_failures = vec![1];
    let cfg = resolve(&c);
    pipeline::gen_micro(&cfg, &dir.path().join("m")).unwrap();
    let m = pipeline::run_cp(&cfg, &dir.path().join("m"), &dir.path().join("d")).unwrap();
    let flags: Vec<bool> = m.samples.iter().map(|s| s.failed).collect();
    assert_eq!(flags, [false, true, false]);
    assert!(m.samples[1].error.as_ref().unwrap().contains("underflow"));
    assert!(m.samples[1].curve.is_none());
    let ds = pipeline::LoadedDataset::load(&dir.path().join("d")).unwrap();
    assert_eq!(ds.names, ["rve_0000", "rve_0002"]);
    assert!(ds.curves.iter().all(|c| c.len() == 50));
}

#[test]
fn all_failures_exit_with_numerical_status() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny("allfail", LoadCase::tension(0.01), 1);
    c.inject_failures = vec![0];
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string(&c).unwrap()).unwrap();
    let s = bin().arg("--config").arg(&cfg_path).args(["gen-micro", "--out"]).arg(dir.path().join("m")).status().unwrap();
    assert!(s.success());
    let s = bin()
        .arg("--config")
        .arg(&cfg_path)
        .args(["run-cp", "--micro"])
        .arg(dir.path().join("m"))
        .arg("--out")
        .arg(dir.path().join("d"))
        .status()
        .unwrap();
    assert_eq!(s.code(), Some(3));
}

#[test]
fn cyclic_preset_gives_240_step_sigma_y_curves() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = pipeline::preset("cu-cyclic").unwrap();
    c.micro.grid = 4;
    c.micro.grains = [2, 2];
    c.micro.count = 1;
    let cfg = resolve(&c);
    assert_eq!(cfg.load.output_quantity, OutputQuantity::SigmaY);
    pipeline::gen_micro(&cfg, &dir.path().join("m")).unwrap();
    pipeline::run_cp(&cfg, &dir.path().join("m"), &dir.path().join("d")).unwrap();
    let curve = ResponseCurve::load_csv(&dir.path().join("d/samples/rve_0000.csv")).unwrap();
    assert_eq!(curve.len(), 240);
    assert!(curve.stresses.iter().any(|&s| s < 0.0) && curve.stresses.iter().any(|&s| s > 0.0));
}

#[test]
fn dataset_manifest_lists_inputs_and_solver() {
    let f = fixture();
    let (m, _): (DatasetManifest, _) = read_manifest(&f.path("dataset"), Artifact::Dataset).unwrap();
    assert_eq!(m.material, MaterialParams::aluminum());
    assert_eq!(m.load.kind, LoadKind::Tension);
    assert_eq!(m.mesh, [4, 4]);
    assert_eq!(m.solver, f.cfg.solver);
    assert_eq!(m.samples.len(), 26);
    assert!(m.samples.iter().all(|s| !s.failed && f.path("dataset").join(s.curve.as_ref().unwrap()).is_file()));
    let text = String::from_utf8(read(&f.path("dataset/manifest.json"))).unwrap();
    for field in ["p_exp", "q_exp", "g_a", "q_self", "q_latent", "temperature"] {
        assert!(text.contains(field), "{field}");
    }
}

#[test]
fn rerunning_a_command_reproduces_its_artifacts() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    pipeline::run_cp(&f.cfg, &f.path("micro"), &dir.path().join("dataset")).unwrap();
    for s in ["manifest.json", "samples/rve_0000.csv", "samples/rve_0025.csv"] {
        assert_eq!(read(&f.path("dataset").join(s)), read(&dir.path().join("dataset").join(s)), "{s}");
    }
    pipeline::train_cmd(&f.cfg, &f.path("dataset"), &f.path("basis"), &dir.path().join("train")).unwrap();
    for s in ["loss.csv", "weights.pcsw", "manifest.json"] {
        assert_eq!(read(&f.path("train").join(s)), read(&dir.path().join("train").join(s)), "{s}");
    }
}

#[test]
fn train_writes_weights_history_and_split() {
    let f = fixture();
    let (w, _): (WeightsManifest, _) = read_manifest(&f.path("train"), Artifact::Weights).unwrap();
    assert_eq!(w.train_samples.len() + w.test_samples.len(), 26);
    assert_eq!(w.test_samples.len(), 5);
    let loss = String::from_utf8(read(&f.path("train/loss.csv"))).unwrap();
    assert!(loss.starts_with("epoch,mse\n"));
    assert_eq!(loss.lines().count(), 2);
    assert!(f.path("train").join(pipeline::SNAPSHOT).is_file());
}

#[test]
fn evaluate_reproduces_the_training_held_out_report() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let r = pipeline::evaluate_cmd(&f.path("train"), &f.path("dataset"), &f.path("basis"), dir.path(), false).unwrap();
    let trained: pipeline::EvalReport = serde_json::from_slice(&read(&f.path("train/report.json"))).unwrap();
    assert_eq!(r.without_timing(), trained.without_timing());
    assert!(dir.path().join("histogram.csv").is_file() && dir.path().join("curves.csv").is_file());
}

#[test]
fn predict_on_five_grids_emits_five_curves() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let micro = dir.path().join("m");
    std::fs::create_dir(&micro).unwrap();
    for i in 0..5 {
        let n = format!("rve_{i:04}.pmic");
        std::fs::copy(f.path("micro").join(&n), micro.join(&n)).unwrap();
    }
    let m = pipeline::predict_cmd(&f.path("train"), &f.path("basis"), &micro, &dir.path().join("p"), false).unwrap();
    assert_eq!(m.files.len(), 5);
    let (back, _): (PredictionManifest, _) = read_manifest(&dir.path().join("p"), Artifact::Predictions).unwrap();
    assert_eq!(back, m);
    for file in &m.files {
        assert_eq!(ResponseCurve::load_csv(&dir.path().join("p").join(file)).unwrap().len(), 50);
    }
}

#[test]
fn finetune_consumes_exactly_the_requested_samples() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let cfg = resolve(&tiny("cu", LoadCase::tension(0.00125), 24));
    let mut cu = cfg.clone();
    cu.material = MaterialParams::copper();
    pipeline::gen_micro(&cu, &dir.path().join("m")).unwrap();
    pipeline::run_cp(&cu, &dir.path().join("m"), &dir.path().join("d")).unwrap();
    pipeline::gen_basis(&cu, &dir.path().join("b")).unwrap();
    let out = pipeline::finetune_cmd(&cu, &f.path("train"), &dir.path().join("d"), &dir.path().join("b"), 20, &dir.path().join("ft")).unwrap();
    assert_eq!(out.manifest.train_samples.len(), 20);
    assert_eq!(out.manifest.test_samples.len(), 4);
    assert_eq!(out.report.post.samples, out.manifest.test_samples);
    let (parent, _): (WeightsManifest, _) = read_manifest(&f.path("train"), Artifact::Weights).unwrap();
    assert_eq!(out.manifest.parent_weights_sha256.as_deref(), Some(parent.weights_sha256.as_str()));
    let err = pipeline::finetune_cmd(&cu, &f.path("train"), &dir.path().join("d"), &dir.path().join("b"), 24, &dir.path().join("x"));
    assert!(matches!(err, Err(Error::Argument(_))));
}

#[test]
fn mismatched_basis_is_refused_with_manifest_status() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let shear = resolve(&tiny("shear", LoadCase::shear(0.02), 1));
    pipeline::gen_basis(&shear, &dir.path().join("b")).unwrap();
    let err = pipeline::train_cmd(&f.cfg, &f.path("dataset"), &dir.path().join("b"), &dir.path().join("t")).unwrap_err();
    assert!(matches!(err, Error::Manifest(_)));
    assert!(err.to_string().contains("load"));

    let o = bin()
        .args(["evaluate", "--weights"])
        .arg(f.path("train"))
        .arg("--dataset")
        .arg(f.path("dataset"))
        .arg("--basis")
        .arg(dir.path().join("b"))
        .arg("--out")
        .arg(dir.path().join("r"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different inputs"));
}

#[test]
fn weights_for_another_load_need_zero_shot() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let shear = resolve(&tiny("shear", LoadCase::shear(0.02), 1));
    pipeline::gen_basis(&shear, &dir.path().join("b")).unwrap();
    let p = pipeline::predict_cmd(&f.path("train"), &dir.path().join("b"), &f.path("micro/rve_0000.pmic"), &dir.path().join("p"), false);
    assert!(matches!(p, Err(Error::Manifest(_))));
    let p = pipeline::predict_cmd(&f.path("train"), &dir.path().join("b"), &f.path("micro/rve_0000.pmic"), &dir.path().join("p"), true);
    assert_eq!(p.unwrap().files, ["rve_0000.csv"]);
}

#[test]
fn altered_weights_break_the_chain() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w");
    std::fs::create_dir(&w).unwrap();
    for n in ["manifest.json", "weights.pcsw"] {
        std::fs::copy(f.path("train").join(n), w.join(n)).unwrap();
    }
    let mut bytes = read(&w.join("weights.pcsw"));
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(w.join("weights.pcsw"), bytes).unwrap();
    let e = pipeline::evaluate_cmd(&w, &f.path("dataset"), &f.path("basis"), &dir.path().join("r"), false).unwrap_err();
    assert_eq!(exit_code(&e), 4);
}

#[test]
fn diverging_training_exits_with_numerical_status() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let mut c = f.cfg.to_experiment();
    c.train.learning_rate = 1e300;
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string(&c).unwrap()).unwrap();
    let o = bin()
        .arg("--config")
        .arg(&cfg_path)
        .args(["train", "--dataset"])
        .arg(f.path("dataset"))
        .arg("--basis")
        .arg(f.path("basis"))
        .arg("--out")
        .arg(dir.path().join("t"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epoch"));
}

#[test]
fn unknown_config_is_a_config_error() {
    let o = bin().args(["--config", "no-such-preset", "gen-basis", "--out", "unused"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_files_may_reference_material_and_load_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cu.json"), serde_json::to_string(&MaterialParams::copper()).unwrap()).unwrap();
    std::fs::write(dir.path().join("load.json"), serde_json::to_string(&LoadCase::tension(0.00125)).unwrap()).unwrap();
    let mut c = tiny("files", LoadCase::tension(0.01), 1);
    c.material = Source::File("cu.json".into());
    c.load = Source::File("load.json".into());
    let r = c.resolve(dir.path()).unwrap();
    assert_eq!(r.material, MaterialParams::copper());
    assert_eq!(r.load.magnitude, 0.00125);
    let snap = dir.path().join("snap");
    std::fs::create_dir(&snap).unwrap();
    r.snapshot(&snap).unwrap();
    let back: ResolvedConfig = serde_json::from_slice(&read(&snap.join(pipeline::SNAPSHOT))).unwrap();
    assert_eq!(back, r);
}

#[test]
fn repro_runs_a_scenario_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["--seed", "4", "repro", "al-tension-1pct", "--count", "6", "--epochs", "10", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: pipeline::ReproSummary = serde_json::from_slice(&read(&dir.path().join("summary.json"))).unwrap();
    assert!(summary.transfer.is_none());
    assert!(!summary.baseline.samples.is_empty());
}
