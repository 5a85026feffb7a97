//! Single-crystal response curves and the mixture bounds built from them.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpfem::curve::interp;
use crate::cpfem::{run_simulation, LoadCase, LoadKind, MaterialParams, OrientationField, ResponseCurve, SolverSettings};
use crate::error::{Error, Result};

pub const N_BASIS: usize = 36;

/// θ_i = i·180/37 for i = 1..36.
pub fn orientation_samples() -> Vec<f64> {
    (1..=N_BASIS).map(|i| i as f64 * 180.0 / 37.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    pub orientations_deg: Vec<f64>,
    pub times: Vec<f64>,
    pub strains: Vec<f64>,
    /// stresses[i][t] for orientation i.
    pub stresses: Vec<Vec<f64>>,
    pub material: MaterialParams,
    pub load: LoadCase,
}

impl BasisSet {
    pub fn n_steps(&self) -> usize {
        self.times.len()
    }

    pub fn member(&self, i: usize) -> ResponseCurve {
        ResponseCurve { times: self.times.clone(), strains: self.strains.clone(), stresses: self.stresses[i].clone() }
    }

    fn check(&self) -> Result<()> {
        if self.stresses.is_empty() {
            return Err(Error::Contract("basis has no curves".into()));
        }
        if self.stresses.len() != self.orientations_deg.len() {
            return Err(Error::Dimension("one orientation per curve".into()));
        }
        if self.stresses.iter().any(|s| s.len() != self.times.len()) || self.strains.len() != self.times.len() {
            return Err(Error::Dimension("basis curves must share one time grid".into()));
        }
        Ok(())
    }

    /// Row t holds the stresses of all members at step t.
    pub fn step_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n_steps()).map(|t| self.stresses.iter().map(|s| s[t]).collect()).collect()
    }

    /// CSV with time, strain, and one stress column per orientation.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time_s,strain");
        for a in &self.orientations_deg {
            s.push_str(&format!(",theta_{a}"));
        }
        s.push('\n');
        for t in 0..self.n_steps() {
            s.push_str(&format!("{},{}", self.times[t], self.strains[t]));
            for m in &self.stresses {
                s.push_str(&format!(",{}", m[t]));
            }
            s.push('\n');
        }
        s
    }

    /// Writes `<stem>.csv` and a `<stem>.json` provenance sidecar.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        std::fs::write(csv_path, self.to_csv())?;
        let side = serde_json::json!({
            "orientations_deg": self.orientations_deg,
            "material": self.material,
            "load": self.load,
        });
        std::fs::write(csv_path.with_extension("json"), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(csv_path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Side {
            orientations_deg: Vec<f64>,
            material: MaterialParams,
            load: LoadCase,
        }
        let side: Side = serde_json::from_str(&std::fs::read_to_string(csv_path.with_extension("json"))?)?;
        let text = std::fs::read_to_string(csv_path)?;
        let err = |line: usize, msg: String| Error::Parse { path: csv_path.to_path_buf(), line, msg };
        let n = side.orientations_deg.len();
        let mut times = Vec::new();
        let mut strains = Vec::new();
        let mut stresses = vec![Vec::new(); n];
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| err(i + 1, e.to_string()))?;
            if vals.len() != n + 2 {
                return Err(err(i + 1, format!("expected {} columns, found {}", n + 2, vals.len())));
            }
            times.push(vals[0]);
            strains.push(vals[1]);
            for (k, s) in stresses.iter_mut().enumerate() {
                s.push(vals[k + 2]);
            }
        }
        let b = BasisSet { orientations_deg: side.orientations_deg, times, strains, stresses, material: side.material, load: side.load };
        b.check()?;
        Ok(b)
    }
}

/// Simulate one single crystal per sampled orientation.
pub fn generate_basis(mat: &MaterialParams, load: &LoadCase, settings: &SolverSettings) -> Result<BasisSet> {
    let n = if load.kind == LoadKind::Shear { 10 } else { 1 };
    let angles = orientation_samples();
    let curves: Vec<ResponseCurve> = angles
        .par_iter()
        .map(|&a| {
            run_simulation(&OrientationField::uniform(n, n, a), mat, load, settings)
                .map_err(|e| Error::Simulation(format!("single crystal at {a:.4} deg: {e}")))
        })
        .collect::<Result<_>>()?;
    Ok(BasisSet {
        orientations_deg: angles,
        times: curves[0].times.clone(),
        strains: curves[0].strains.clone(),
        stresses: curves.into_iter().map(|c| c.stresses).collect(),
        material: mat.clone(),
        load: load.clone(),
    })
}

fn with_stresses(b: &BasisSet, stresses: Vec<f64>) -> ResponseCurve {
    ResponseCurve { times: b.times.clone(), strains: b.strains.clone(), stresses }
}

/// Iso-strain mixture: pointwise mean of the member stresses.
pub fn voigt_curve(basis: &BasisSet) -> Result<ResponseCurve> {
    basis.check()?;
    let n = basis.stresses.len() as f64;
    Ok(with_stresses(basis, basis.step_matrix().iter().map(|row| row.iter().sum::<f64>() / n).collect()))
}

/// Iso-stress mixture: mean member strain at equal stress, mapped back onto the strain grid.
/// Past the stress range shared by all members the curve is held flat.
pub fn reuss_curve(basis: &BasisSet) -> Result<ResponseCurve> {
    basis.check()?;
    if !basis.strains.windows(2).all(|w| w[1] > w[0]) || basis.strains[0] <= 0.0 {
        return Err(Error::Contract("iso-stress mixture needs monotone positive loading".into()));
    }
    let mut knots = vec![0.0];
    let mut member_axes = Vec::with_capacity(basis.stresses.len());
    for (k, s) in basis.stresses.iter().enumerate() {
        let mut st = vec![0.0];
        st.extend_from_slice(s);
        if !st.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Contract(format!(
                "member {} ({} deg) is not strictly increasing in stress",
                k, basis.orientations_deg[k]
            )));
        }
        let mut eps = vec![0.0];
        eps.extend_from_slice(&basis.strains);
        member_axes.push((st, eps));
    }
    let s_max = member_axes.iter().map(|(st, _)| *st.last().unwrap()).fold(f64::INFINITY, f64::min);
    for (st, _) in &member_axes {
        knots.extend(st.iter().copied().filter(|&v| v > 0.0 && v <= s_max));
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let n = member_axes.len() as f64;
    let mean_strain: Vec<f64> =
        knots.iter().map(|&s| member_axes.iter().map(|(st, eps)| interp(st, eps, s)).sum::<f64>() / n).collect();
    let stresses = basis.strains.iter().map(|&e| interp(&mean_strain, &knots, e)).collect();
    Ok(with_stresses(basis, stresses))
}

/// Pointwise (min, max) over members.
pub fn envelope(basis: &BasisSet) -> Result<(ResponseCurve, ResponseCurve)> {
    basis.check()?;
    let rows = basis.step_matrix();
    let lo = rows.iter().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let hi = rows.iter().map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    Ok((with_stresses(basis, lo), with_stresses(basis, hi)))
}

/// Secant slope at the first output step.
pub fn elastic_slope(curve: &ResponseCurve) -> f64 {
    curve.stresses[0] / curve.strains[0]
}
