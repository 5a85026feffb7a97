use nalgebra::{Matrix3, Matrix6, Rotation3, Vector3, Vector6};

use super::material::{rotated_stiffness, MaterialParams};
use crate::error::{Error, Result};

pub const N_SLIP: usize = 12;

/// FCC {111}<110> systems as (plane normal, direction), unnormalized.
const FCC: [([f64; 3], [f64; 3]); N_SLIP] = [
    ([1., 1., 1.], [0., 1., -1.]),
    ([1., 1., 1.], [-1., 0., 1.]),
    ([1., 1., 1.], [1., -1., 0.]),
    ([-1., 1., 1.], [0., 1., -1.]),
    ([-1., 1., 1.], [1., 0., 1.]),
    ([-1., 1., 1.], [1., 1., 0.]),
    ([1., -1., 1.], [0., 1., 1.]),
    ([1., -1., 1.], [1., 0., -1.]),
    ([1., -1., 1.], [1., 1., 0.]),
    ([1., 1., -1.], [0., 1., 1.]),
    ([1., 1., -1.], [1., 0., 1.]),
    ([1., 1., -1.], [1., -1., 0.]),
];

#[derive(Clone, Debug)]
pub struct SlipSystems {
    pub directions: [Vector3<f64>; N_SLIP],
    pub normals: [Vector3<f64>; N_SLIP],
    /// Schmid tensors s ⊗ n.
    pub schmid: [Matrix3<f64>; N_SLIP],
}

impl SlipSystems {
    /// The 12 FCC systems rotated in-plane by `theta_deg` about z.
    pub fn fcc(theta_deg: f64) -> Self {
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), theta_deg.to_radians());
        let mut directions = [Vector3::zeros(); N_SLIP];
        let mut normals = [Vector3::zeros(); N_SLIP];
        let mut schmid = [Matrix3::zeros(); N_SLIP];
        for (a, (n, s)) in FCC.iter().enumerate() {
            let n = rot * Vector3::from(*n).normalize();
            let s = rot * Vector3::from(*s).normalize();
            schmid[a] = s * n.transpose();
            directions[a] = s;
            normals[a] = n;
        }
        SlipSystems { directions, normals, schmid }
    }
}

/// Rotated stiffness and slip geometry of one grain orientation.
#[derive(Clone, Debug)]
pub struct Crystal {
    pub theta_deg: f64,
    pub stiffness: Matrix6<f64>,
    pub systems: SlipSystems,
    /// Voigt vectors with τ = S_voigt · p for a symmetric stress.
    pub projections: [Vector6<f64>; N_SLIP],
}

impl Crystal {
    pub fn new(mat: &MaterialParams, theta_deg: f64) -> Self {
        let systems = SlipSystems::fcc(theta_deg);
        let mut projections = [Vector6::zeros(); N_SLIP];
        for (p, m) in projections.iter_mut().zip(&systems.schmid) {
            *p = Vector6::new(m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(1, 2)] + m[(2, 1)], m[(0, 2)] + m[(2, 0)], m[(0, 1)] + m[(1, 0)]);
        }
        Crystal { theta_deg, stiffness: rotated_stiffness(mat, theta_deg), systems, projections }
    }
}

/// τ^α = stress : P^α.
pub fn resolved_shear(stress: &Matrix3<f64>, systems: &SlipSystems) -> [f64; N_SLIP] {
    let mut tau = [0.0; N_SLIP];
    for (t, p) in tau.iter_mut().zip(&systems.schmid) {
        *t = stress.component_mul(p).sum();
    }
    tau
}

/// Signed slip rate and its derivative with respect to τ.
pub fn slip_rate_with_slope(tau: f64, g: f64, mat: &MaterialParams) -> (f64, f64) {
    let mag = tau.abs();
    if mag <= mat.g_a {
        return (0.0, 0.0);
    }
    let span = g - mat.g_a;
    let x = (mag - mat.g_a) / span;
    if x >= 1.0 {
        return (mat.gamma_dot0 * tau.signum(), 0.0);
    }
    let xp = x.powf(mat.p_exp);
    let base = 1.0 - xp;
    let bq = base.powf(mat.q_exp);
    let k = mat.barrier();
    let rate = mat.gamma_dot0 * (-k * bq).exp();
    // d/d|τ| of γ̇0 exp(-k (1 - x^p)^q)
    let slope = rate * k * mat.q_exp * (bq / base) * mat.p_exp * (xp / x) / span;
    (rate * tau.signum(), slope)
}

/// Thermally activated slip rate in 1/s.
pub fn slip_rate(tau: f64, g: f64, mat: &MaterialParams) -> Result<f64> {
    if !tau.is_finite() {
        return Err(Error::Numerical(format!("non-finite resolved shear stress {tau}")));
    }
    Ok(slip_rate_with_slope(tau, g, mat).0)
}

/// Saturating hardening update of the slip resistances, clamped to [g0, gmax].
pub fn harden(g: &[f64; N_SLIP], dgamma: &[f64; N_SLIP], mat: &MaterialParams) -> [f64; N_SLIP] {
    let mut h = [0.0; N_SLIP];
    for b in 0..N_SLIP {
        h[b] = mat.h0 * (mat.gmax - g[b]) / (mat.gmax - mat.g0) * dgamma[b].abs();
    }
    let total: f64 = h.iter().sum();
    let mut out = *g;
    for a in 0..N_SLIP {
        let dg = mat.q_latent * (total - h[a]) + mat.q_self * h[a];
        out[a] = (g[a] + dg).clamp(mat.g0, mat.gmax);
    }
    out
}

/// sqrt(3/2 S:S) of the deviator.
pub fn von_mises(sigma: &Matrix3<f64>) -> f64 {
    let dev = sigma - Matrix3::identity() * (sigma.trace() / 3.0);
    (1.5 * dev.component_mul(&dev).sum()).sqrt()
}

/// Arithmetic mean over integration points of a uniform mesh.
pub fn mean_field(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("mean of an empty field".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
