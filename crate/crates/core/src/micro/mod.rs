//! Synthetic 2D polycrystals as voxel grids of grain ids.

mod pmic;
mod vtk;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cpfem::OrientationField;
use crate::error::{arg, Error, Result};

pub use pmic::{load_grid, parse_pmic, save_grid, to_pmic};
pub use vtk::{import_vtk, parse_orientation_table, parse_structured_points, StructuredPoints};

/// H×W grain-id grid (row-major, row 0 at y = 0) with one in-plane angle per grain.
#[derive(Clone, Debug, PartialEq)]
pub struct Microstructure {
    pub height: usize,
    pub width: usize,
    pub grain_id: Vec<usize>,
    pub orientation_deg: Vec<f64>,
    /// Edge length in mm.
    pub physical_size: f64,
}

impl Microstructure {
    pub fn n_grains(&self) -> usize {
        self.orientation_deg.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return arg("empty grid");
        }
        if self.grain_id.len() != self.height * self.width {
            return Err(Error::Dimension(format!(
                "{}x{} grid holds {} ids",
                self.height,
                self.width,
                self.grain_id.len()
            )));
        }
        if let Some(a) = self.orientation_deg.iter().find(|a| !(-180.0..=180.0).contains(*a)) {
            return arg(format!("orientation {a} outside [-180, 180]"));
        }
        let mut owned = vec![false; self.n_grains()];
        for &g in &self.grain_id {
            *owned.get_mut(g).ok_or_else(|| Error::Argument(format!("grain {g} has no orientation")))? = true;
        }
        if let Some(g) = owned.iter().position(|o| !o) {
            return arg(format!("grain {g} owns no voxel"));
        }
        Ok(())
    }

    pub fn orientation_field(&self) -> OrientationField {
        OrientationField {
            height: self.height,
            width: self.width,
            angles: self.grain_id.iter().map(|&g| self.orientation_deg[g]).collect(),
        }
    }
}

/// Seeded Voronoi tessellation with seeds on distinct voxel centers.
pub fn generate_microstructure(seed: u64, height: usize, width: usize, n_grains: usize) -> Result<Microstructure> {
    let cells = height * width;
    if n_grains == 0 || n_grains > cells {
        return arg(format!("grain count {n_grains} outside 1..={cells}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<(i64, i64)> = sample(&mut rng, cells, n_grains)
        .into_iter()
        .map(|i| ((i % width) as i64, (i / width) as i64))
        .collect();
    let orientation_deg = (0..n_grains).map(|_| rng.gen_range(-180.0..=180.0)).collect();
    let mut grain_id = Vec::with_capacity(cells);
    for r in 0..height as i64 {
        for c in 0..width as i64 {
            let mut best = (i64::MAX, 0);
            for (g, &(sx, sy)) in seeds.iter().enumerate() {
                let d = (c - sx).pow(2) + (r - sy).pow(2);
                if d < best.0 {
                    best = (d, g);
                }
            }
            grain_id.push(best.1);
        }
    }
    Ok(Microstructure { height, width, grain_id, orientation_deg, physical_size: 1.0 })
}

/// Affine map [-180, 180] → [0, 1].
pub fn normalize_orientations(angles: &[f64]) -> Result<Vec<f64>> {
    angles
        .iter()
        .map(|&a| {
            if (-180.0..=180.0).contains(&a) {
                Ok((a + 180.0) / 360.0)
            } else {
                arg(format!("angle {a} outside [-180, 180]"))
            }
        })
        .collect()
}

pub fn denormalize_orientations(values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| v * 360.0 - 180.0).collect()
}
