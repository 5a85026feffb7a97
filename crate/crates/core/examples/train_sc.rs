//! Trains a small SC-DeepONet on a handful of simulated RVEs and scores it
//! on held-out ones.

use xtalnet::basis::generate_basis;
use xtalnet::cpfem::{run_simulation, LoadCase, MaterialParams, SolverSettings};
use xtalnet::eval::evaluate_sc;
use xtalnet::micro::generate_microstructure;
use xtalnet::surrogate::{loss_csv, split_indices, train_sc, Dataset, ScDeepOnet, TrainConfig, TrunkConfig};

fn main() -> xtalnet::Result<()> {
    let (mat, load, settings) = (MaterialParams::aluminum(), LoadCase::tension(0.01), SolverSettings::default());
    let micros = (0..16).map(|i| generate_microstructure(100 + i, 8, 8, 5)).collect::<xtalnet::Result<Vec<_>>>()?;
    let curves = micros
        .iter()
        .map(|m| run_simulation(&m.orientation_field(), &mat, &load, &settings))
        .collect::<xtalnet::Result<Vec<_>>>()?;
    let basis = generate_basis(&mat, &load, &settings)?;
    let data = Dataset::from_pairs(&micros, &curves)?;
    let (tr, te) = split_indices(data.len(), 0.75, 1)?;

    let mut model = ScDeepOnet::new(TrunkConfig::desk(), 42)?;
    let cfg = TrainConfig { epochs: 1500, learning_rate: 1e-3, ..Default::default() };
    let report = train_sc(&mut model, &data.subset(&tr), &basis, &cfg)?;
    print!("{}", loss_csv(&report.history));
    let (ev, _) = evaluate_sc(&model, &data.subset(&te), &basis, None)?;
    println!(
        "held-out: mean relative error {:.2}%, R2 {:.4}, MAE {:.2} MPa",
        ev.report.mean_relative_error_pct, ev.report.r2, ev.report.mae_mpa
    );
    Ok(())
}
