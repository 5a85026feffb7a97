//! Experiment orchestration: configs, presets, manifests and the commands
//! behind the command-line tool.

mod commands;
mod config;
mod manifest;
mod presets;
mod repro;

pub use commands::{
    evaluate_cmd, exit_code, finetune_cmd, gen_basis, gen_micro, list_micro, load_weights, predict_cmd, run_cp, train_cmd,
    DatasetTiming, EvalReport, FinetuneOutcome, FinetuneReport, LoadedBasis, LoadedDataset, Model, PercentileCase,
    TrainOutcome, TrainingSummary, BASIS_FILE, LOSS_FILE, REPORT_FILE, SAMPLES_DIR, TIMING_FILE, WEIGHTS_FILE,
};
pub use config::{derive_seed, ExperimentConfig, MicroSettings, ModelChoice, ResolvedConfig, Source, SNAPSHOT};
pub use manifest::{
    json_sha256, read_manifest, sha256_hex, write_manifest, Artifact, BasisManifest, DatasetManifest, MicroEntry,
    MicroManifest, PredictionManifest, Provenance, ReportManifest, SampleEntry, WeightsManifest, MANIFEST,
};
pub use presets::{preset, preset_names, PRESETS};
pub use repro::{repro, Overrides, ReproSummary};
