use nalgebra::Matrix6;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;

fn default_p() -> f64 {
    0.78
}
fn default_q() -> f64 {
    1.15
}
fn default_q_latent() -> f64 {
    1.4
}
fn one() -> f64 {
    1.0
}
fn room_temperature() -> f64 {
    293.15
}

/// Cubic elasticity plus slip and hardening constants. Stresses in MPa.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub c11: f64,
    pub c12: f64,
    pub c44: f64,
    pub h0: f64,
    pub g0: f64,
    pub gmax: f64,
    pub gamma_dot0: f64,
    /// Activation energy in J.
    pub delta_f: f64,
    #[serde(default = "default_p")]
    pub p_exp: f64,
    #[serde(default = "default_q")]
    pub q_exp: f64,
    #[serde(default)]
    pub g_a: f64,
    #[serde(default = "one")]
    pub q_self: f64,
    #[serde(default = "default_q_latent")]
    pub q_latent: f64,
    #[serde(default = "room_temperature")]
    pub temperature: f64,
}

impl MaterialParams {
    pub fn aluminum() -> Self {
        Self::with_table(131038.0, 80314.0, 30942.0, 1750.0, 220.0, 400.0, 1.732e6, 2.5e-19)
    }

    pub fn copper() -> Self {
        Self::with_table(166957.0, 120900.0, 75000.0, 187.0, 22.0, 153.0, 1.52e7, 2.85e-19)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_table(c11: f64, c12: f64, c44: f64, h0: f64, g0: f64, gmax: f64, gamma_dot0: f64, delta_f: f64) -> Self {
        MaterialParams {
            c11,
            c12,
            c44,
            h0,
            g0,
            gmax,
            gamma_dot0,
            delta_f,
            p_exp: default_p(),
            q_exp: default_q(),
            g_a: 0.0,
            q_self: 1.0,
            q_latent: default_q_latent(),
            temperature: room_temperature(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c11, self.c12, self.c44, self.h0, self.g0, self.gmax, self.gamma_dot0, self.delta_f, self.p_exp,
            self.q_exp, self.g_a, self.q_self, self.q_latent, self.temperature,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return arg("material parameters must be finite");
        }
        if !(self.c11 > self.c12 && self.c44 > 0.0 && self.c11 + 2.0 * self.c12 > 0.0) {
            return arg("cubic stiffness is not positive definite");
        }
        if !(0.0 <= self.g_a && self.g_a < self.g0 && self.g0 <= self.gmax) {
            return arg("require 0 <= g_a < g0 <= gmax");
        }
        if !(self.p_exp > 0.0 && self.p_exp <= 1.0 && (1.0..=2.0).contains(&self.q_exp)) {
            return arg("require 0 < p <= 1 and 1 <= q <= 2");
        }
        if self.temperature <= 0.0 || self.gamma_dot0 <= 0.0 || self.delta_f <= 0.0 || self.h0 < 0.0 {
            return arg("temperature, reference rate, activation energy must be positive");
        }
        Ok(())
    }

    /// ΔF / (k_B T), the dimensionless activation barrier.
    pub fn barrier(&self) -> f64 {
        self.delta_f / (BOLTZMANN * self.temperature)
    }

    /// The eight tabulated properties in a fixed order.
    pub fn table(&self) -> [f64; 8] {
        [self.c11, self.c12, self.c44, self.h0, self.g0, self.gmax, self.gamma_dot0, self.delta_f]
    }

    /// Unrotated cubic stiffness in Voigt notation (11,22,33,23,13,12).
    pub fn cubic_stiffness(&self) -> Matrix6<f64> {
        let mut c = Matrix6::zeros();
        for i in 0..3 {
            for j in 0..3 {
                c[(i, j)] = if i == j { self.c11 } else { self.c12 };
            }
            c[(i + 3, i + 3)] = self.c44;
        }
        c
    }
}

const VOIGT: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

fn voigt_index(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (1, 2) => 3,
        (0, 2) => 4,
        _ => 5,
    }
}

/// Cubic stiffness rotated by `theta_deg` about the out-of-plane axis,
/// C'_ijkl = R_ia R_jb R_kc R_ld C_abcd.
pub fn rotated_stiffness(mat: &MaterialParams, theta_deg: f64) -> Matrix6<f64> {
    let c0 = mat.cubic_stiffness();
    let (s, c) = theta_deg.to_radians().sin_cos();
    let r = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
    let full = |i: usize, j: usize, k: usize, l: usize| c0[(voigt_index(i, j), voigt_index(k, l))];
    let mut out = Matrix6::zeros();
    for (p, &(i, j)) in VOIGT.iter().enumerate() {
        for (q, &(k, l)) in VOIGT.iter().enumerate() {
            let mut acc = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    let rab = r[i][a] * r[j][b];
                    if rab == 0.0 {
                        continue;
                    }
                    for cc in 0..3 {
                        for d in 0..3 {
                            acc += rab * r[k][cc] * r[l][d] * full(a, b, cc, d);
                        }
                    }
                }
            }
            out[(p, q)] = acc;
        }
    }
    // exact symmetry regardless of summation order
    (out + out.transpose()) * 0.5
}
