//! The material-parameter DeepONet: nine scalars in the branch instead of
//! the single-crystal curves.

use xtalnet::basis::generate_basis;
use xtalnet::cpfem::{run_simulation, LoadCase, MaterialParams, SolverSettings};
use xtalnet::eval::evaluate_curves;
use xtalnet::micro::generate_microstructure;
use xtalnet::surrogate::{mp_inputs, predict_mp, train_mp, Dataset, MpDeepOnet, ScalerPerStep, TrainConfig, TrunkConfig};

fn main() -> xtalnet::Result<()> {
    let (mat, load) = (MaterialParams::aluminum(), LoadCase::tension(0.01));
    let micros = (0..12).map(|i| generate_microstructure(i, 8, 8, 5)).collect::<xtalnet::Result<Vec<_>>>()?;
    let curves = micros
        .iter()
        .map(|m| run_simulation(&m.orientation_field(), &mat, &load, &SolverSettings::default()))
        .collect::<xtalnet::Result<Vec<_>>>()?;
    let data = Dataset::from_pairs(&micros, &curves)?;
    let scaler = ScalerPerStep::from_basis(&generate_basis(&mat, &load, &SolverSettings::default())?)?;
    let inputs = vec![mp_inputs(&mat, &load); data.len()];

    let mut model = MpDeepOnet::new(TrunkConfig::desk(), load.n_output_steps, 3)?;
    println!("MP branch parameters: {}", model.branch_param_count());
    let cfg = TrainConfig { epochs: 800, ..Default::default() };
    let r = train_mp(&mut model, &data, &inputs, &scaler, &cfg)?;
    println!("final training mse {:.3e}", r.final_loss.unwrap_or(f64::NAN));
    let p = predict_mp(&model, &data.grids, data.height, data.width, &inputs, &scaler)?;
    let ev = evaluate_curves(&data.targets, &p.stresses, None)?;
    println!("training-set relative error {:.2}%, {:.2e} s per case", ev.report.mean_relative_error_pct, p.seconds_per_case);
    Ok(())
}
