//! The 36 single-crystal curves with their Voigt and Reuss mixtures and
//! the pointwise envelope.

use xtalnet::basis::{elastic_slope, envelope, generate_basis, reuss_curve, voigt_curve};
use xtalnet::cpfem::{LoadCase, MaterialParams, SolverSettings};

fn main() -> xtalnet::Result<()> {
    let basis = generate_basis(&MaterialParams::aluminum(), &LoadCase::tension(0.01), &SolverSettings::default())?;
    let voigt = voigt_curve(&basis)?;
    let reuss = reuss_curve(&basis)?;
    let (lo, hi) = envelope(&basis)?;
    println!("{} members, {} steps", basis.orientations_deg.len(), basis.n_steps());
    println!("elastic slopes: Reuss {:.0} MPa, Voigt {:.0} MPa", elastic_slope(&reuss), elastic_slope(&voigt));
    println!("strain     lower   Reuss   Voigt   upper");
    for k in (9..basis.n_steps()).step_by(10) {
        println!("{:.4}  {:7.1} {:7.1} {:7.1} {:7.1}", basis.strains[k], lo.stresses[k], reuss.stresses[k], voigt.stresses[k], hi.stresses[k]);
    }
    Ok(())
}
