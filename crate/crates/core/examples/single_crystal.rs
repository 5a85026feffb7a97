//! Stress-strain curve of one crystal under 1% plane-strain tension.

use xtalnet::cpfem::{simulate, LoadCase, MaterialParams, OrientationField, SolverSettings};

fn main() -> xtalnet::Result<()> {
    let mat = MaterialParams::aluminum();
    let load = LoadCase::tension(0.01);
    for theta in [0.0, 22.5, 45.0] {
        let sim = simulate(&OrientationField::uniform(1, 1, theta), &mat, &load, &SolverSettings::default())?;
        let c = &sim.curve;
        println!(
            "theta {theta:5.1}: sigma_vm {:.1} MPa at strain {:.4}, {:.1} MPa at {:.4}; {} increments, |det Fp - 1| <= {:.1e}",
            c.stresses[4], c.strains[4], c.stresses[49], c.strains[49], sim.stats.increments, sim.stats.max_det_fp_error
        );
    }
    Ok(())
}
