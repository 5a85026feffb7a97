#![allow(dead_code)]

use nalgebra::{Matrix3, Matrix6};
use xtalnet::cpfem::MaterialParams;

/// Bond-matrix rotation C' = K C Kᵀ for a rotation by theta about z.
pub fn bond_rotated(mat: &MaterialParams, theta_deg: f64) -> Matrix6<f64> {
    let (s, c) = theta_deg.to_radians().sin_cos();
    let a = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
    let mut k = Matrix6::zeros();
    for i in 0..3 {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        for j in 0..3 {
            let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
            k[(i, j)] = a[(i, j)] * a[(i, j)];
            k[(i, j + 3)] = 2.0 * a[(i, j1)] * a[(i, j2)];
            k[(i + 3, j)] = a[(i1, j)] * a[(i2, j)];
            k[(i + 3, j + 3)] = a[(i1, j1)] * a[(i2, j2)] + a[(i1, j2)] * a[(i2, j1)];
        }
    }
    let mut c0 = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c0[(i, j)] = if i == j { mat.c11 } else { mat.c12 };
        }
        c0[(i + 3, i + 3)] = mat.c44;
    }
    k * c0 * k.transpose()
}

/// σ_yy/ε_yy of a plane-strain sheet with σ_xx = σ_xy = 0.
pub fn plane_strain_tension_modulus(c: &Matrix6<f64>) -> f64 {
    let idx = [0, 1, 5];
    let red = nalgebra::Matrix3::from_fn(|i, j| c[(idx[i], idx[j])]);
    1.0 / red.try_inverse().unwrap()[(1, 1)]
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
