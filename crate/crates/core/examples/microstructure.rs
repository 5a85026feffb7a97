//! Seeded Voronoi microstructure, written to and read back from `.pmic`.

use xtalnet::micro::{generate_microstructure, load_grid, normalize_orientations, save_grid};

fn main() -> xtalnet::Result<()> {
    let m = generate_microstructure(7, 16, 16, 10)?;
    for row in m.grain_id.chunks(m.width).rev() {
        let line: String = row.iter().map(|&g| char::from_digit(g as u32 % 36, 36).unwrap()).collect();
        println!("{line}");
    }
    for (g, a) in m.orientation_deg.iter().enumerate() {
        println!("grain {g}: {a:8.3} deg");
    }
    let path = std::env::temp_dir().join("xtalnet-example.pmic");
    save_grid(&m, &path)?;
    assert_eq!(load_grid(&path)?, m);
    let grid = normalize_orientations(&m.orientation_field().angles)?;
    println!("saved {}; normalized grid spans [{:.3}, {:.3}]", path.display(),
        grid.iter().cloned().fold(f64::INFINITY, f64::min), grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    Ok(())
}
