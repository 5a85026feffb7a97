//! The full pipeline on a tiny configuration: microstructures, CP dataset,
//! basis, training, evaluation and prediction, with manifests throughout.

use std::path::Path;

use xtalnet::pipeline::{self, read_manifest, Artifact, DatasetManifest};

fn main() -> xtalnet::Result<()> {
    let mut cfg = pipeline::preset("al-tension-1pct")?;
    cfg.micro.grid = 8;
    cfg.micro.grains = [4, 6];
    cfg.micro.count = 10;
    cfg.train.epochs = 500;
    let cfg = cfg.resolve(Path::new("."))?;
    let root = std::env::temp_dir().join("xtalnet-pipeline-example");
    let _ = std::fs::remove_dir_all(&root);

    pipeline::gen_micro(&cfg, &root.join("micro"))?;
    pipeline::run_cp(&cfg, &root.join("micro"), &root.join("dataset"))?;
    pipeline::gen_basis(&cfg, &root.join("basis"))?;
    let trained = pipeline::train_cmd(&cfg, &root.join("dataset"), &root.join("basis"), &root.join("train"))?;
    let report = pipeline::evaluate_cmd(&root.join("train"), &root.join("dataset"), &root.join("basis"), &root.join("report"), false)?;
    let preds = pipeline::predict_cmd(&root.join("train"), &root.join("basis"), &root.join("micro"), &root.join("predict"), false)?;

    let (ds, hash): (DatasetManifest, String) = read_manifest(&root.join("dataset"), Artifact::Dataset)?;
    println!("dataset {} with {} samples, manifest sha256 {}", root.join("dataset").display(), ds.samples.len(), &hash[..16]);
    println!("trained on {}, tested on {}", trained.manifest.train_samples.len(), trained.manifest.test_samples.len());
    println!("held-out relative error {:.2}%, R2 {:.4}", report.metrics.mean_relative_error_pct, report.metrics.r2);
    println!("{} prediction files in {}", preds.files.len(), root.join("predict").display());
    Ok(())
}
