use std::time::Instant;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use super::banded::BandMatrix;
use super::constitutive::{material_update, plane_strain_f, LocalSettings, MaterialState, UpdateFailure};
use super::crystal::{mean_field, von_mises, Crystal};
use super::curve::{interp, ResponseCurve};
use super::load::{LoadCase, LoadKind, OutputQuantity};
use super::material::MaterialParams;
use crate::error::{arg, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Global residual tolerance relative to the internal force norm.
    pub tolerance: f64,
    pub max_newton_iterations: usize,
    pub growth_after: usize,
    pub growth_factor: f64,
    pub local: LocalSettings,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tolerance: 1e-8,
            max_newton_iterations: 12,
            growth_after: 3,
            growth_factor: 1.5,
            local: LocalSettings::default(),
        }
    }
}

/// Row-major H×W grid of angles in degrees; row 0 is the bottom edge.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationField {
    pub height: usize,
    pub width: usize,
    pub angles: Vec<f64>,
}

impl OrientationField {
    pub fn new(height: usize, width: usize, angles: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return arg("orientation field must be non-empty");
        }
        if angles.len() != height * width {
            return Err(Error::Dimension(format!("{}x{} field with {} angles", height, width, angles.len())));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return arg("orientation angles must be finite");
        }
        Ok(OrientationField { height, width, angles })
    }

    pub fn uniform(height: usize, width: usize, theta: f64) -> Self {
        OrientationField { height, width, angles: vec![theta; height * width] }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub increments: usize,
    pub rejected: usize,
    pub newton_iterations: usize,
    pub max_det_fp_error: f64,
    pub min_dt: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub curve: ResponseCurve,
    pub stats: SolveStats,
    /// Converged states at the end of the load history.
    pub final_states: Vec<MaterialState>,
}

const GP: f64 = 0.577_350_269_189_625_8;
const XI: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const ETA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

struct Mesh {
    h: usize,
    w: usize,
    /// dN_a/dX_J at each Gauss point of the unit square element.
    dn: [[[f64; 2]; 4]; 4],
    det_j: f64,
}

impl Mesh {
    fn new(h: usize, w: usize) -> Self {
        let gps = [(-GP, -GP), (GP, -GP), (GP, GP), (-GP, GP)];
        let mut dn = [[[0.0; 2]; 4]; 4];
        for (g, &(xi, eta)) in gps.iter().enumerate() {
            for a in 0..4 {
                // element edge length 1 → dξ/dx = 2
                dn[g][a][0] = 0.25 * XI[a] * (1.0 + ETA[a] * eta) * 2.0;
                dn[g][a][1] = 0.25 * ETA[a] * (1.0 + XI[a] * xi) * 2.0;
            }
        }
        Mesh { h, w, dn, det_j: 0.25 }
    }

    fn n_nodes(&self) -> usize {
        (self.h + 1) * (self.w + 1)
    }

    fn node(&self, col: usize, row: usize) -> usize {
        row * (self.w + 1) + col
    }

    fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (r, c) = (e / self.w, e % self.w);
        [self.node(c, r), self.node(c + 1, r), self.node(c + 1, r + 1), self.node(c, r + 1)]
    }

    fn coords(&self, node: usize) -> (f64, f64) {
        ((node % (self.w + 1)) as f64, (node / (self.w + 1)) as f64)
    }
}

/// Prescribed DOFs as (dof, coefficient): u_dof = coefficient · applied strain.
fn constraints(mesh: &Mesh, kind: LoadKind) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    match kind {
        LoadKind::Tension | LoadKind::Cyclic => {
            for c in 0..=mesh.w {
                out.push((2 * mesh.node(c, 0) + 1, 0.0));
                out.push((2 * mesh.node(c, mesh.h) + 1, mesh.h as f64));
            }
            out.push((2 * mesh.node(0, 0), 0.0));
        }
        LoadKind::Shear => {
            for n in 0..mesh.n_nodes() {
                let (c, r) = (n % (mesh.w + 1), n / (mesh.w + 1));
                if c == 0 || r == 0 || c == mesh.w || r == mesh.h {
                    out.push((2 * n, r as f64));
                    out.push((2 * n + 1, 0.0));
                }
            }
        }
    }
    out.sort_by_key(|&(d, _)| d);
    out
}

/// Homogeneous displacement consistent with the boundary conditions.
fn affine_guess(mesh: &Mesh, kind: LoadKind, strain: f64, u: &mut [f64]) {
    for n in 0..mesh.n_nodes() {
        let (_, y) = mesh.coords(n);
        match kind {
            LoadKind::Tension | LoadKind::Cyclic => {
                u[2 * n] = 0.0;
                u[2 * n + 1] = strain * y;
            }
            LoadKind::Shear => {
                u[2 * n] = strain * y;
                u[2 * n + 1] = 0.0;
            }
        }
    }
}

struct Assembly {
    residual: Vec<f64>,
    force_norm: f64,
    states: Vec<MaterialState>,
    quantity: Vec<f64>,
}

struct Problem<'a> {
    mesh: Mesh,
    crystals: Vec<Crystal>,
    mat: &'a MaterialParams,
    load: &'a LoadCase,
    settings: &'a SolverSettings,
    fixed: Vec<(usize, f64)>,
    /// global DOF → free index
    free: Vec<Option<usize>>,
    n_free: usize,
}

impl Problem<'_> {
    fn assemble(
        &self,
        u: &[f64],
        committed: &[MaterialState],
        dt: f64,
        k: Option<&mut BandMatrix>,
    ) -> std::result::Result<Assembly, UpdateFailure> {
        let n_dof = u.len();
        let mut fint = vec![0.0; n_dof];
        let mut states = Vec::with_capacity(committed.len());
        let mut quantity = Vec::with_capacity(committed.len());
        let mut k = k;
        if let Some(k) = k.as_deref_mut() {
            k.clear();
        }
        let mesh = &self.mesh;
        for e in 0..mesh.h * mesh.w {
            let nodes = mesh.element_nodes(e);
            let crystal = &self.crystals[e];
            let mut ke = [[0.0; 8]; 8];
            for g in 0..4 {
                let dn = &mesh.dn[g];
                let mut hgrad = [0.0; 4];
                for a in 0..4 {
                    for i in 0..2 {
                        for jj in 0..2 {
                            hgrad[2 * i + jj] += u[2 * nodes[a] + i] * dn[a][jj];
                        }
                    }
                }
                let f = plane_strain_f(hgrad);
                let up = material_update(&f, &committed[4 * e + g], dt, self.mat, crystal, &self.settings.local)?;
                for a in 0..4 {
                    for i in 0..2 {
                        let mut s = 0.0;
                        for jj in 0..2 {
                            s += up.pk1[(i, jj)] * dn[a][jj];
                        }
                        fint[2 * nodes[a] + i] += s * mesh.det_j;
                    }
                }
                if k.is_some() {
                    accumulate_stiffness(&mut ke, &up.tangent, dn, mesh.det_j);
                }
                quantity.push(match self.load.output_quantity {
                    OutputQuantity::VonMises => von_mises(&up.cauchy),
                    OutputQuantity::SigmaY => up.cauchy[(1, 1)],
                });
                states.push(up.state);
            }
            if let Some(k) = k.as_deref_mut() {
                for (p, row) in ke.iter().enumerate() {
                    let Some(fp) = self.free[2 * nodes[p / 2] + p % 2] else { continue };
                    for (q, v) in row.iter().enumerate() {
                        if let Some(fq) = self.free[2 * nodes[q / 2] + q % 2] {
                            k.add(fp, fq, *v);
                        }
                    }
                }
            }
        }
        let mut residual = vec![0.0; self.n_free];
        for (d, v) in fint.iter().enumerate() {
            if let Some(i) = self.free[d] {
                residual[i] = *v;
            }
        }
        let force_norm = fint.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Assembly { residual, force_norm, states, quantity })
    }

    /// Global Newton for one increment; returns displacement and assembly at convergence.
    fn increment(
        &self,
        u: &mut [f64],
        committed: &[MaterialState],
        dt: f64,
        k: &mut BandMatrix,
    ) -> std::result::Result<(Assembly, usize), String> {
        for it in 0..=self.settings.max_newton_iterations {
            let need_k = self.n_free > 0;
            let asm = self
                .assemble(u, committed, dt, need_k.then_some(&mut *k))
                .map_err(|e| e.to_string())?;
            let rnorm = asm.residual.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !rnorm.is_finite() {
                return Err("non-finite residual".into());
            }
            if rnorm <= self.settings.tolerance * asm.force_norm || rnorm == 0.0 {
                return Ok((asm, it));
            }
            if it == self.settings.max_newton_iterations {
                return Err(format!("global Newton stalled, residual {rnorm:e} of {:e}", asm.force_norm));
            }
            let mut rhs: Vec<f64> = asm.residual.iter().map(|v| -v).collect();
            k.solve_in_place(&mut rhs).ok_or("singular tangent stiffness")?;
            for (d, fi) in self.free.iter().enumerate() {
                if let Some(i) = fi {
                    u[d] += rhs[*i];
                }
            }
        }
        unreachable!()
    }
}

fn accumulate_stiffness(ke: &mut [[f64; 8]; 8], d: &Matrix4<f64>, dn: &[[f64; 2]; 4], w: f64) {
    for a in 0..4 {
        for i in 0..2 {
            for b in 0..4 {
                for k in 0..2 {
                    let mut s = 0.0;
                    for j in 0..2 {
                        for l in 0..2 {
                            s += dn[a][j] * d[(2 * i + j, 2 * k + l)] * dn[b][l];
                        }
                    }
                    ke[2 * a + i][2 * b + k] += s * w;
                }
            }
        }
    }
}

/// Run a displacement-controlled simulation and return the mean-field curve.
pub fn run_simulation(
    field: &OrientationField,
    mat: &MaterialParams,
    load: &LoadCase,
    settings: &SolverSettings,
) -> Result<ResponseCurve> {
    simulate(field, mat, load, settings).map(|s| s.curve)
}

/// As [`run_simulation`], with solver statistics and final states.
pub fn simulate(field: &OrientationField, mat: &MaterialParams, load: &LoadCase, settings: &SolverSettings) -> Result<Simulation> {
    mat.validate()?;
    load.validate()?;
    if field.angles.len() != field.height * field.width {
        return Err(Error::Dimension("orientation field size".into()));
    }
    let started = Instant::now();
    let mesh = Mesh::new(field.height, field.width);
    let n_dof = 2 * mesh.n_nodes();
    let fixed = constraints(&mesh, load.kind);
    let mut free = vec![None; n_dof];
    let mut n_free = 0;
    let mut fi = fixed.iter().peekable();
    for (d, slot) in free.iter_mut().enumerate() {
        if fi.peek().is_some_and(|&&(fd, _)| fd == d) {
            fi.next();
            continue;
        }
        *slot = Some(n_free);
        n_free += 1;
    }
    let mut bandwidth = 0;
    for e in 0..mesh.h * mesh.w {
        let ids: Vec<usize> =
            mesh.element_nodes(e).iter().flat_map(|&n| [free[2 * n], free[2 * n + 1]]).flatten().collect();
        for &a in &ids {
            for &b in &ids {
                bandwidth = bandwidth.max(a.abs_diff(b));
            }
        }
    }
    let mut cache: Vec<Crystal> = Vec::new();
    let crystals: Vec<Crystal> = field
        .angles
        .iter()
        .map(|&a| {
            if let Some(c) = cache.iter().find(|c| c.theta_deg == a) {
                c.clone()
            } else {
                let c = Crystal::new(mat, a);
                cache.push(c.clone());
                c
            }
        })
        .collect();
    let problem = Problem { mesh, crystals, mat, load, settings, fixed, free, n_free };

    let mut k = BandMatrix::zeros(n_free, bandwidth);
    let mut committed = vec![MaterialState::initial(mat); 4 * field.height * field.width];
    let mut u = vec![0.0; n_dof];
    let mut u_prev: Option<(Vec<f64>, f64)> = None;
    let mut history_t = vec![0.0];
    let mut history_q = vec![0.0];
    let mut stats = SolveStats { min_dt: f64::INFINITY, ..Default::default() };

    let total = load.step_time;
    let mut t = 0.0;
    let mut dt = load.dt_max;
    let mut streak = 0;
    while t < total * (1.0 - 1e-12) {
        let step = dt.min(total - t);
        let t_new = if step == total - t { total } else { t + step };
        let strain = load.applied_strain(t_new);

        let mut trial = u.clone();
        match &u_prev {
            Some((prev, dt_prev)) => {
                let r = step / dt_prev;
                for d in 0..n_dof {
                    trial[d] = u[d] + (u[d] - prev[d]) * r;
                }
            }
            None => affine_guess(&problem.mesh, load.kind, strain, &mut trial),
        }
        for &(d, coef) in &problem.fixed {
            trial[d] = coef * strain;
        }

        match problem.increment(&mut trial, &committed, step, &mut k) {
            Ok((asm, iters)) => {
                stats.increments += 1;
                stats.newton_iterations += iters;
                stats.min_dt = stats.min_dt.min(step);
                for s in &asm.states {
                    stats.max_det_fp_error = stats.max_det_fp_error.max((s.fp.determinant() - 1.0).abs());
                }
                committed = asm.states;
                u_prev = Some((std::mem::replace(&mut u, trial), step));
                t = t_new;
                history_t.push(t);
                history_q.push(mean_field(&asm.quantity)?);
                streak += 1;
                if streak >= settings.growth_after {
                    dt = (dt * settings.growth_factor).min(load.dt_max);
                    streak = 0;
                }
            }
            Err(reason) => {
                stats.rejected += 1;
                streak = 0;
                dt *= 0.5;
                if dt < load.dt_min * (1.0 - 1e-12) {
                    return Err(Error::Simulation(format!(
                        "time step underflow at t = {t:.6} s (dt {dt:e} < dt_min {:e}): {reason}",
                        load.dt_min
                    )));
                }
            }
        }
    }

    let times = load.output_times();
    let strains = times.iter().map(|&t| load.applied_strain(t)).collect();
    let stresses = times.iter().map(|&t| interp(&history_t, &history_q, t)).collect();
    stats.wall_seconds = started.elapsed().as_secs_f64();
    Ok(Simulation { curve: ResponseCurve::new(times, strains, stresses)?, stats, final_states: committed })
}
