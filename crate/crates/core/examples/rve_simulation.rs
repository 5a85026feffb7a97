//! Mean-field tension, shear and cyclic responses of one polycrystal RVE.

use xtalnet::cpfem::{simulate, LoadCase, MaterialParams, SolverSettings};
use xtalnet::micro::generate_microstructure;

fn main() -> xtalnet::Result<()> {
    let m = generate_microstructure(3, 8, 8, 6)?;
    let field = m.orientation_field();
    let cases = [
        ("aluminum tension 1%", MaterialParams::aluminum(), LoadCase::tension(0.01)),
        ("aluminum shear 2%", MaterialParams::aluminum(), LoadCase::shear(0.02)),
        ("copper cyclic 0.125%", MaterialParams::copper(), LoadCase::cyclic(0.00125)),
    ];
    for (name, mat, load) in cases {
        let sim = simulate(&field, &mat, &load, &SolverSettings::default())?;
        let c = &sim.curve;
        let peak = c.stresses.iter().fold(0.0f64, |a, s| a.max(s.abs()));
        println!("{name}: {} output steps, final {:.2} MPa, peak |stress| {:.2} MPa, {:.2} s",
            c.len(), c.stresses[c.len() - 1], peak, sim.stats.wall_seconds);
    }
    Ok(())
}
