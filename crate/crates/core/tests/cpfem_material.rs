mod common;

use common::{bond_rotated, rel};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use xtalnet::cpfem::constitutive::{plane_strain_f, voigt_strain, voigt_to_matrix};
use xtalnet::cpfem::*;

#[test]
fn aluminum_stiffness_entries_at_zero() {
    let c = rotated_stiffness(&MaterialParams::aluminum(), 0.0);
    assert!((c[(0, 0)] - 131038.0).abs() < 1e-9);
    assert!((c[(0, 1)] - 80314.0).abs() < 1e-9);
    assert!((c[(3, 3)] - 30942.0).abs() < 1e-9);
}

#[test]
fn isotropic_stiffness_ignores_rotation() {
    let mut mat = MaterialParams::aluminum();
    mat.c44 = 0.5 * (mat.c11 - mat.c12);
    let c0 = rotated_stiffness(&mat, 0.0);
    for theta in [13.0, 45.0, 97.5, -150.0] {
        let c = rotated_stiffness(&mat, theta);
        assert!((c - c0).abs().max() <= 1e-9 * c0.abs().max());
    }
}

#[test]
fn quarter_turn_is_a_symmetry() {
    let mat = MaterialParams::copper();
    for theta in [0.0, 17.0, 63.2] {
        let a = rotated_stiffness(&mat, theta);
        let b = rotated_stiffness(&mat, theta + 90.0);
        assert!((a - b).abs().max() <= 1e-9 * a.abs().max());
    }
}

proptest! {
    #[test]
    fn rotation_matches_bond_matrix_and_is_spd(theta in -180.0f64..180.0) {
        let mat = MaterialParams::copper();
        let c = rotated_stiffness(&mat, theta);
        let oracle = bond_rotated(&mat, theta);
        prop_assert!((c - oracle).abs().max() <= 1e-9 * oracle.abs().max());
        prop_assert!((c - c.transpose()).abs().max() == 0.0);
        let eig = c.symmetric_eigen().eigenvalues;
        prop_assert!(eig.iter().all(|&e| e > 0.0));
    }

    #[test]
    fn slip_system_geometry(theta in -180.0f64..180.0) {
        let sys = SlipSystems::fcc(theta);
        for a in 0..N_SLIP {
            prop_assert!(sys.directions[a].dot(&sys.normals[a]).abs() < 1e-14);
            prop_assert!((sys.directions[a].norm() - 1.0).abs() < 1e-14);
            prop_assert!((sys.normals[a].norm() - 1.0).abs() < 1e-14);
            prop_assert!(sys.schmid[a].trace().abs() < 1e-14);
        }
    }

    #[test]
    fn slip_rate_slope_matches_difference(tau in -300.0f64..300.0, g in 220.0f64..400.0) {
        let mat = MaterialParams::aluminum();
        let h = 1e-6 * g;
        prop_assume!((tau.abs() - g).abs() > 2.0 * h && tau.abs() > 2.0 * h);
        let (r, slope) = slip_rate_with_slope(tau, g, &mat);
        let fd = (slip_rate(tau + h, g, &mat).unwrap() - slip_rate(tau - h, g, &mat).unwrap()) / (2.0 * h);
        prop_assert!((slope - fd).abs() <= 1e-5 * fd.abs().max(1e-300) + 1e-300, "{} vs {}", slope, fd);
        prop_assert_eq!(r, -slip_rate(-tau, g, &mat).unwrap());
    }
}

use xtalnet::cpfem::crystal::slip_rate_with_slope;

#[test]
fn resolved_shear_cases() {
    let sys = SlipSystems::fcc(23.0);
    let hydro = Matrix3::identity() * 150.0;
    assert!(resolved_shear(&hydro, &sys).iter().all(|t| t.abs() < 1e-12));

    let m = Vector3::new(0.3, -0.8, 0.2).normalize();
    let sigma = m * m.transpose() * 200.0;
    let tau = resolved_shear(&sigma, &sys);
    let neg = resolved_shear(&(-sigma), &sys);
    for a in 0..N_SLIP {
        let schmid = sys.directions[a].dot(&m) * sys.normals[a].dot(&m);
        assert!((tau[a] - 200.0 * schmid).abs() < 1e-12);
        assert_eq!(neg[a], -tau[a]);
    }
}

#[test]
fn slip_rate_cases() {
    let mat = MaterialParams::aluminum();
    assert_eq!(slip_rate(0.0, 220.0, &mat).unwrap(), 0.0);
    assert_eq!(slip_rate(220.0, 220.0, &mat).unwrap(), mat.gamma_dot0);
    assert_eq!(slip_rate(-250.0, 250.0, &mat).unwrap(), -mat.gamma_dot0);
    // high-precision scalar evaluation of the rate law
    let r = slip_rate(110.0, 220.0, &mat).unwrap();
    assert!(rel(r, 2.5736046862759161613e-4) < 1e-10, "{r}");
    assert!(slip_rate(f64::NAN, 220.0, &mat).is_err());

    let mut athermal = mat.clone();
    athermal.g_a = 30.0;
    assert_eq!(slip_rate(29.0, 220.0, &athermal).unwrap(), 0.0);
    assert!(slip_rate(31.0, 220.0, &athermal).unwrap() > 0.0);
}

#[test]
fn hardening_cases() {
    let mat = MaterialParams::aluminum();
    let g = [mat.g0; N_SLIP];
    assert_eq!(harden(&g, &[0.0; N_SLIP], &mat), g);
    let sat = [mat.gmax; N_SLIP];
    assert_eq!(harden(&sat, &[0.3; N_SLIP], &mat), sat);

    let mut gs = [0.0; N_SLIP];
    for (i, v) in gs.iter_mut().enumerate() {
        *v = mat.g0 + 5.0 * i as f64;
    }
    let mut dg = [0.0; N_SLIP];
    dg[4] = -2e-4;
    let out = harden(&gs, &dg, &mat);
    // explicit q matrix times h vector
    let h: Vec<f64> = (0..N_SLIP).map(|b| mat.h0 * (mat.gmax - gs[b]) / (mat.gmax - mat.g0) * dg[b].abs()).collect();
    for a in 0..N_SLIP {
        let mut acc = 0.0;
        for b in 0..N_SLIP {
            let q = if a == b { mat.q_self } else { mat.q_latent };
            acc += q * h[b];
        }
        assert!((out[a] - (gs[a] + acc)).abs() < 1e-12);
    }
}

#[test]
fn von_mises_and_mean_cases() {
    let s = 120.0;
    let uni = Matrix3::new(0.0, 0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, 0.0);
    assert!((von_mises(&uni) - s).abs() < 1e-12);
    assert!(von_mises(&(Matrix3::identity() * 7.0)).abs() < 1e-12);
    let shear = Matrix3::new(0.0, s, 0.0, s, 0.0, 0.0, 0.0, 0.0, 0.0);
    assert!((von_mises(&shear) - s * 3f64.sqrt()).abs() < 1e-10);
    assert_eq!(mean_field(&[3.0; 5]).unwrap(), 3.0);
    assert_eq!(mean_field(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
    assert!(mean_field(&[]).is_err());
}

#[test]
fn material_validation() {
    assert!(MaterialParams::aluminum().validate().is_ok());
    let mut bad = MaterialParams::aluminum();
    bad.g_a = bad.g0;
    assert!(bad.validate().is_err());
    let mut bad = MaterialParams::copper();
    bad.c12 = bad.c11;
    assert!(bad.validate().is_err());
    let json = serde_json::json!({
        "c11": 1.0e5, "c12": 5.0e4, "c44": 3.0e4, "h0": 100.0, "g0": 20.0, "gmax": 80.0,
        "gamma_dot0": 1.0e6, "delta_f": 2.0e-19
    });
    let m: MaterialParams = serde_json::from_value(json).unwrap();
    assert_eq!((m.p_exp, m.q_exp, m.g_a, m.q_latent, m.temperature), (0.78, 1.15, 0.0, 1.4, 293.15));
}

fn update(f: &Matrix3<f64>, state: &MaterialState, dt: f64, mat: &MaterialParams, c: &Crystal) -> Update {
    material_update(f, state, dt, mat, c, &LocalSettings::default()).unwrap()
}

#[test]
fn identity_gives_zero_stress() {
    let mat = MaterialParams::aluminum();
    let c = Crystal::new(&mat, 31.0);
    let s0 = MaterialState::initial(&mat);
    let up = update(&Matrix3::identity(), &s0, 0.01, &mat, &c);
    assert!(up.cauchy.abs().max() == 0.0);
    assert_eq!(up.state, s0);
}

#[test]
fn small_strain_matches_linear_elasticity() {
    let mat = MaterialParams::copper();
    for theta in [0.0, 20.0, 45.0] {
        let c = Crystal::new(&mat, theta);
        let h = [1e-6, 0.4e-6, -0.3e-6, -0.5e-6];
        let f = plane_strain_f(h);
        let up = update(&f, &MaterialState::initial(&mat), 0.01, &mat, &c);
        let eps = Matrix3::new(h[0], 0.5 * (h[1] + h[2]), 0.0, 0.5 * (h[1] + h[2]), h[3], 0.0, 0.0, 0.0, 0.0);
        let lin = voigt_to_matrix(&(bond_rotated(&mat, theta) * voigt_strain(&eps)));
        assert!((up.cauchy - lin).abs().max() <= 1e-3 * lin.abs().max());
        assert!(up.state.accumulated_slip.iter().all(|&s| s <= 1e-12));
    }
}

fn ramp(mat: &MaterialParams, c: &Crystal, path: &[[f64; 4]], dt: f64) -> (Vec<Update>, MaterialState) {
    let mut st = MaterialState::initial(mat);
    let mut out = Vec::new();
    for h in path {
        let up = update(&plane_strain_f(*h), &st, dt, mat, c);
        st = up.state.clone();
        out.push(up);
    }
    (out, st)
}

fn stretch_path(peak: f64, n: usize, back: bool) -> Vec<[f64; 4]> {
    let mut p: Vec<[f64; 4]> = (1..=n).map(|k| [-0.4 * peak * k as f64 / n as f64, 0.0, 0.0, peak * k as f64 / n as f64]).collect();
    if back {
        let up = p.clone();
        p.extend(up.iter().rev().skip(1).cloned());
        p.push([0.0; 4]);
    }
    p
}

#[test]
fn plastic_cycle_leaves_residual_stress_and_hardening() {
    let mat = MaterialParams::aluminum();
    let c = Crystal::new(&mat, 10.0);
    let (ups, st) = ramp(&mat, &c, &stretch_path(0.01, 100, true), 0.01);
    let last = ups.last().unwrap();
    assert!(last.cauchy.abs().max() > 1.0, "residual {}", last.cauchy);
    assert!(st.g.iter().any(|&g| g > mat.g0));
    // g non-decreasing and bounded along the path, det Fp stays one
    let mut prev = [mat.g0; N_SLIP];
    for u in &ups {
        for a in 0..N_SLIP {
            assert!(u.state.g[a] >= prev[a] && u.state.g[a] <= mat.gmax);
        }
        prev = u.state.g;
        assert!((u.state.fp.determinant() - 1.0).abs() < 1e-8);
        assert!((u.cauchy - u.cauchy.transpose()).abs().max() <= 1e-10 * u.cauchy.norm());
    }
}

#[test]
fn analytic_tangent_matches_finite_differences() {
    let mat = MaterialParams::aluminum();
    let c = Crystal::new(&mat, 37.0);
    let (_, st) = ramp(&mat, &c, &stretch_path(0.006, 60, false), 0.01);
    let f = plane_strain_f([-0.0026, 0.0004, 0.0001, 0.0062]);
    let analytic = update(&f, &st, 0.01, &mat, &c);
    assert!(analytic.state.accumulated_slip.iter().sum::<f64>() > st.accumulated_slip.iter().sum::<f64>());
    let fd = material_update(
        &f,
        &st,
        0.01,
        &mat,
        &c,
        &LocalSettings { tangent: TangentMode::FiniteDifference, ..Default::default() },
    )
    .unwrap();
    let err = (analytic.tangent - fd.tangent).norm() / fd.tangent.norm();
    assert!(err < 1e-4, "tangent mismatch {err}\n{}\n{}", analytic.tangent, fd.tangent);
}

#[test]
fn inverted_element_is_reported() {
    let mat = MaterialParams::aluminum();
    let c = Crystal::new(&mat, 0.0);
    let f = plane_strain_f([-2.0, 0.0, 0.0, 0.0]);
    assert!(matches!(
        material_update(&f, &MaterialState::initial(&mat), 0.01, &mat, &c, &LocalSettings::default()),
        Err(UpdateFailure::Inversion(_))
    ));
}

#[test]
fn far_below_yield_is_elastic_and_reversible() {
    // every |τ| stays below 0.05·g0
    let mat = MaterialParams::aluminum();
    let c = Crystal::new(&mat, 28.0);
    let (ups, st) = ramp(&mat, &c, &stretch_path(1e-4, 20, true), 0.01);
    let peak = ups.iter().map(|u| u.cauchy.abs().max()).fold(0.0, f64::max);
    for u in &ups {
        let tau = resolved_shear(&voigt_to_matrix(&u.pk2), &c.systems);
        assert!(tau.iter().all(|t| t.abs() < 0.05 * mat.g0));
    }
    assert!(st.accumulated_slip.iter().all(|&s| s <= 1e-12));
    assert!(ups.last().unwrap().cauchy.abs().max() <= 1e-6 * peak);
}
