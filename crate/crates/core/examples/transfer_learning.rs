//! Trains on aluminum tension, then fine-tunes only the branch on a few
//! copper samples. The trunk stays bitwise frozen.

use xtalnet::basis::generate_basis;
use xtalnet::cpfem::{run_simulation, LoadCase, MaterialParams, SolverSettings};
use xtalnet::eval::evaluate_sc;
use xtalnet::micro::generate_microstructure;
use xtalnet::surrogate::{finetune_sc, train_sc, Dataset, ScDeepOnet, TrainConfig, TrunkConfig};

fn dataset(mat: &MaterialParams, load: &LoadCase, seeds: std::ops::Range<u64>) -> xtalnet::Result<Dataset> {
    let micros = seeds.map(|s| generate_microstructure(s, 8, 8, 5)).collect::<xtalnet::Result<Vec<_>>>()?;
    let curves = micros
        .iter()
        .map(|m| run_simulation(&m.orientation_field(), mat, load, &SolverSettings::default()))
        .collect::<xtalnet::Result<Vec<_>>>()?;
    Dataset::from_pairs(&micros, &curves)
}

fn main() -> xtalnet::Result<()> {
    let (al, cu) = (MaterialParams::aluminum(), MaterialParams::copper());
    let (al_load, cu_load) = (LoadCase::tension(0.01), LoadCase::tension(0.00125));
    let al_basis = generate_basis(&al, &al_load, &SolverSettings::default())?;
    let cu_basis = generate_basis(&cu, &cu_load, &SolverSettings::default())?;
    let al_data = dataset(&al, &al_load, 0..12)?;
    let cu_train = dataset(&cu, &cu_load, 100..105)?;
    let cu_test = dataset(&cu, &cu_load, 200..206)?;

    let mut model = ScDeepOnet::new(TrunkConfig::desk(), 5)?;
    let cfg = TrainConfig { epochs: 1000, finetune_epochs: 1000, ..Default::default() };
    train_sc(&mut model, &al_data, &al_basis, &cfg)?;
    let trunk_before: Vec<_> = model.params().iter().filter(|p| p.name.starts_with("trunk.")).map(|p| p.value.clone()).collect();

    let (pre, _) = evaluate_sc(&model, &cu_test, &cu_basis, None)?;
    finetune_sc(&mut model, &cu_train, &cu_basis, &cfg)?;
    let (post, _) = evaluate_sc(&model, &cu_test, &cu_basis, None)?;
    let trunk_after: Vec<_> = model.params().iter().filter(|p| p.name.starts_with("trunk.")).map(|p| p.value.clone()).collect();
    println!(
        "copper test error {:.2}% before, {:.2}% after fine-tuning on {} samples; trunk unchanged: {}",
        pre.report.mean_relative_error_pct,
        post.report.mean_relative_error_pct,
        cu_train.len(),
        trunk_before == trunk_after
    );
    Ok(())
}
