//! Imports a legacy structured-points grain-id volume plus an orientation
//! table into a microstructure.

use xtalnet::micro::{import_vtk, to_pmic};

const VTK: &str = "# vtk DataFile Version 2.0
two grains
ASCII
DATASET STRUCTURED_POINTS
DIMENSIONS 5 5 1
ORIGIN 0 0 0
SPACING 0.25 0.25 0.25
CELL_DATA 16
SCALARS GrainIds int 1
LOOKUP_TABLE default
4 4 9 9
4 4 9 9
4 9 9 9
9 9 9 9
";

const ORI: &str = "# grain angle_deg
4 30
9 -60
";

fn main() -> xtalnet::Result<()> {
    let dir = std::env::temp_dir().join("xtalnet-vtk-example");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("rve.vtk"), VTK)?;
    std::fs::write(dir.join("rve.ori"), ORI)?;
    let m = import_vtk(&dir.join("rve.vtk"), &dir.join("rve.ori"))?;
    println!("{}x{} grid, {} grains, edge {} mm", m.height, m.width, m.n_grains(), m.physical_size);
    print!("{}", to_pmic(&m));
    Ok(())
}
