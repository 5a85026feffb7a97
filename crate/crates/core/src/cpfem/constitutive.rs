use nalgebra::{Matrix3, Matrix4, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use super::crystal::{harden, slip_rate_with_slope, Crystal, N_SLIP};
use super::material::MaterialParams;

/// Converged plastic state at one integration point.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialState {
    pub fp: Matrix3<f64>,
    pub g: [f64; N_SLIP],
    pub accumulated_slip: [f64; N_SLIP],
    /// Last converged PK2 stress (Voigt), reused as the next Newton guess.
    pub stress: Vector6<f64>,
}

impl MaterialState {
    pub fn initial(mat: &MaterialParams) -> Self {
        MaterialState {
            fp: Matrix3::identity(),
            g: [mat.g0; N_SLIP],
            accumulated_slip: [0.0; N_SLIP],
            stress: Vector6::zeros(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TangentMode {
    /// Linearization of the converged local residual.
    Analytic,
    /// Forward differences of the converged first Piola stress.
    FiniteDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSettings {
    /// Residual tolerance relative to max(|trial stress|, g0).
    pub tolerance: f64,
    pub max_iterations: usize,
    pub tangent: TangentMode,
    pub fd_step: f64,
}

impl Default for LocalSettings {
    fn default() -> Self {
        LocalSettings { tolerance: 1e-10, max_iterations: 50, tangent: TangentMode::Analytic, fd_step: 1e-7 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum UpdateFailure {
    Inversion(f64),
    NoConvergence { iterations: usize, residual: f64 },
}

impl std::fmt::Display for UpdateFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UpdateFailure::Inversion(d) => write!(f, "element inversion, det F = {d:e}"),
            UpdateFailure::NoConvergence { iterations, residual } => {
                write!(f, "local Newton stalled after {iterations} iterations, residual {residual:e}")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Update {
    /// PK2 stress in the intermediate configuration (Voigt).
    pub pk2: Vector6<f64>,
    /// F · T, conjugate to F.
    pub pk1: Matrix3<f64>,
    pub cauchy: Matrix3<f64>,
    pub state: MaterialState,
    /// dP/dF over the in-plane components ordered (11, 12, 21, 22).
    pub tangent: Matrix4<f64>,
    pub iterations: usize,
}

pub const IN_PLANE: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

pub fn voigt_strain(x: &Matrix3<f64>) -> Vector6<f64> {
    Vector6::new(x[(0, 0)], x[(1, 1)], x[(2, 2)], x[(1, 2)] + x[(2, 1)], x[(0, 2)] + x[(2, 0)], x[(0, 1)] + x[(1, 0)])
}

pub fn voigt_to_matrix(s: &Vector6<f64>) -> Matrix3<f64> {
    Matrix3::new(s[0], s[5], s[4], s[5], s[1], s[3], s[4], s[3], s[2])
}

struct Local<'a> {
    crystal: &'a Crystal,
    mat: &'a MaterialParams,
    g: &'a [f64; N_SLIP],
    dt: f64,
    /// Fp_old⁻ᵀ Fᵀ F Fp_old⁻¹
    a: Matrix3<f64>,
}

struct Eval {
    residual: Vector6<f64>,
    model: Vector6<f64>,
    dgamma: [f64; N_SLIP],
    slope: [f64; N_SLIP],
    m: Matrix3<f64>,
    det_m: f64,
    c: f64,
}

impl Local<'_> {
    fn eval(&self, s: &Vector6<f64>) -> Option<Eval> {
        let mut dgamma = [0.0; N_SLIP];
        let mut slope = [0.0; N_SLIP];
        let mut m = Matrix3::identity();
        for a in 0..N_SLIP {
            let tau = s.dot(&self.crystal.projections[a]);
            let (r, dr) = slip_rate_with_slope(tau, self.g[a], self.mat);
            dgamma[a] = self.dt * r;
            slope[a] = self.dt * dr;
            if dgamma[a] != 0.0 {
                m -= self.crystal.systems.schmid[a] * dgamma[a];
            }
        }
        let det_m = m.determinant();
        if !(det_m > 0.0 && det_m.is_finite()) {
            return None;
        }
        let c = det_m.powf(-2.0 / 3.0);
        let b = m.transpose() * self.a * m * c;
        let e = (b - Matrix3::identity()) * 0.5;
        let model = self.crystal.stiffness * voigt_strain(&e);
        let residual = s - model;
        if !residual.iter().all(|v| v.is_finite()) {
            return None;
        }
        Some(Eval { residual, model, dgamma, slope, m, det_m, c })
    }

    fn jacobian(&self, ev: &Eval) -> Option<Matrix6<f64>> {
        let mut j = Matrix6::identity();
        let m_inv = ev.m.try_inverse()?;
        let ma = ev.m.transpose() * self.a;
        let b = ma * ev.m;
        for a in 0..N_SLIP {
            if ev.slope[a] == 0.0 {
                continue;
            }
            let p = &self.crystal.systems.schmid[a];
            // dE/dΔγ for E = ½(c MᵀAM − I), M = I − ΣΔγP, c = det(M)^(-2/3)
            let de = (b * ((m_inv * p).trace() / 3.0) - ma * p) * ev.c;
            let dmodel = self.crystal.stiffness * voigt_strain(&de);
            j -= dmodel * self.crystal.projections[a].transpose() * ev.slope[a];
        }
        Some(j)
    }
}

impl Local<'_> {
    /// Newton on the PK2 stress starting from the better of `guess` and the trial stress.
    fn solve(&self, guess: &Vector6<f64>, settings: &LocalSettings) -> Result<(Eval, usize), UpdateFailure> {
        let trial = self.crystal.stiffness * voigt_strain(&((self.a - Matrix3::identity()) * 0.5));
        let tol = settings.tolerance * trial.norm().max(self.mat.g0);
        let mut cur = match (self.eval(&trial), self.eval(guess)) {
            (Some(t), Some(g)) => {
                if g.residual.norm() < t.residual.norm() {
                    (*guess, g)
                } else {
                    (trial, t)
                }
            }
            (Some(t), None) => (trial, t),
            (None, Some(g)) => (*guess, g),
            (None, None) => return Err(UpdateFailure::NoConvergence { iterations: 0, residual: f64::INFINITY }),
        };
        for it in 0..settings.max_iterations {
            let rnorm = cur.1.residual.norm();
            if rnorm <= tol {
                return Ok((cur.1, it));
            }
            let step = self
                .jacobian(&cur.1)
                .and_then(|j| j.lu().solve(&(-cur.1.residual)))
                .ok_or(UpdateFailure::NoConvergence { iterations: it, residual: rnorm })?;
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let cand = cur.0 + step * lambda;
                if let Some(ev) = self.eval(&cand) {
                    if ev.residual.norm() < (1.0 - 1e-4 * lambda) * rnorm {
                        accepted = Some((cand, ev));
                        break;
                    }
                }
                lambda *= 0.5;
            }
            cur = accepted.ok_or(UpdateFailure::NoConvergence { iterations: it, residual: rnorm })?;
        }
        let residual = cur.1.residual.norm();
        if residual <= tol {
            return Ok((cur.1, settings.max_iterations));
        }
        Err(UpdateFailure::NoConvergence { iterations: settings.max_iterations, residual })
    }
}

fn pk1_of(f: &Matrix3<f64>, pk2: &Vector6<f64>) -> Matrix3<f64> {
    f * voigt_to_matrix(pk2)
}

fn plane_det(f: &Matrix3<f64>) -> f64 {
    f.determinant()
}

/// Advance one integration point over `dt` under the deformation gradient `f`.
pub fn material_update(
    f: &Matrix3<f64>,
    state: &MaterialState,
    dt: f64,
    mat: &MaterialParams,
    crystal: &Crystal,
    settings: &LocalSettings,
) -> Result<Update, UpdateFailure> {
    let det_f = plane_det(f);
    if !(det_f > 0.0) {
        return Err(UpdateFailure::Inversion(det_f));
    }
    let fp_inv = state.fp.try_inverse().ok_or(UpdateFailure::Inversion(0.0))?;
    let fs = f * fp_inv;
    let local = Local { crystal, mat, g: &state.g, dt, a: fs.transpose() * fs };
    let (ev, iterations) = local.solve(&state.stress, settings)?;

    let pk2 = ev.model;
    let pk1 = pk1_of(f, &pk2);
    let t = voigt_to_matrix(&pk2);
    let cauchy = f * t * f.transpose() / det_f;

    let fp_inv_new = fp_inv * ev.m * ev.det_m.powf(-1.0 / 3.0);
    let fp = fp_inv_new.try_inverse().ok_or(UpdateFailure::Inversion(0.0))?;
    let mut accumulated_slip = state.accumulated_slip;
    for (acc, d) in accumulated_slip.iter_mut().zip(&ev.dgamma) {
        *acc += d.abs();
    }
    let new_state = MaterialState { fp, g: harden(&state.g, &ev.dgamma, mat), accumulated_slip, stress: pk2 };

    let tangent = match settings.tangent {
        TangentMode::Analytic => {
            let j = local.jacobian(&ev).ok_or(UpdateFailure::NoConvergence { iterations, residual: f64::NAN })?;
            let lu = j.lu();
            let mut d = Matrix4::zeros();
            for (col, &(k, l)) in IN_PLANE.iter().enumerate() {
                let mut df = Matrix3::zeros();
                df[(k, l)] = 1.0;
                let x = fs.transpose() * df * fp_inv;
                let da = x + x.transpose();
                let dmodel = crystal.stiffness * voigt_strain(&(ev.m.transpose() * da * ev.m * (0.5 * ev.c)));
                let ds = lu.solve(&dmodel).ok_or(UpdateFailure::NoConvergence { iterations, residual: f64::NAN })?;
                let dp = df * t + f * voigt_to_matrix(&ds);
                for (row, &(i, jj)) in IN_PLANE.iter().enumerate() {
                    d[(row, col)] = dp[(i, jj)];
                }
            }
            d
        }
        TangentMode::FiniteDifference => {
            let mut d = Matrix4::zeros();
            for (col, &(k, l)) in IN_PLANE.iter().enumerate() {
                let mut fh = *f;
                fh[(k, l)] += settings.fd_step;
                let fsh = fh * fp_inv;
                let lh = Local { crystal, mat, g: &state.g, dt, a: fsh.transpose() * fsh };
                let (evh, _) = lh.solve(&pk2, settings)?;
                let dp = (pk1_of(&fh, &evh.model) - pk1) / settings.fd_step;
                for (row, &(i, jj)) in IN_PLANE.iter().enumerate() {
                    d[(row, col)] = dp[(i, jj)];
                }
            }
            d
        }
    };
    Ok(Update { pk2, pk1, cauchy, state: new_state, tangent, iterations })
}

/// Plane-strain deformation gradient from the in-plane displacement gradient.
pub fn plane_strain_f(h: [f64; 4]) -> Matrix3<f64> {
    Matrix3::new(1.0 + h[0], h[1], 0.0, h[2], 1.0 + h[3], 0.0, 0.0, 0.0, 1.0)
}
