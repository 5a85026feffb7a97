mod common;

use common::{bond_rotated, plane_strain_tension_modulus, rel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xtalnet::cpfem::*;
use xtalnet::Error;

fn elastic_tension(kind_quantity: OutputQuantity) -> LoadCase {
    LoadCase { output_quantity: kind_quantity, n_output_steps: 10, ..LoadCase::tension(1e-5) }
}

#[test]
fn single_element_elastic_slope_matches_condensation() {
    let mat = MaterialParams::aluminum();
    for theta in [0.0, 45.0, 10.0, 22.5, 60.0, 90.0, 135.0, -33.0] {
        let field = OrientationField::uniform(1, 1, theta);
        let curve = run_simulation(&field, &mat, &elastic_tension(OutputQuantity::SigmaY), &SolverSettings::default()).unwrap();
        let slope = curve.stresses[0] / curve.strains[0];
        let oracle = plane_strain_tension_modulus(&bond_rotated(&mat, theta));
        assert!(rel(slope, oracle) < 1e-3, "theta {theta}: {slope} vs {oracle}");
    }
}

#[test]
fn single_element_von_mises_slope() {
    // σ_zz from ε_zz = 0 enters the von Mises stress
    let mat = MaterialParams::copper();
    for theta in [0.0, 45.0, 17.0] {
        let c = bond_rotated(&mat, theta);
        let idx = [0, 1, 5];
        let red = nalgebra::Matrix3::from_fn(|i, j| c[(idx[i], idx[j])]);
        let compliance = red.try_inverse().unwrap();
        // unit σ_yy: in-plane strains, then σ_zz
        let eps = compliance.column(1);
        let szz = c[(2, 0)] * eps[0] + c[(2, 1)] * eps[1] + c[(2, 5)] * eps[2];
        let vm_per_syy = (1.0 + szz * szz - szz).sqrt();
        let oracle = vm_per_syy / eps[1];
        let field = OrientationField::uniform(1, 1, theta);
        let curve =
            run_simulation(&field, &mat, &elastic_tension(OutputQuantity::VonMises), &SolverSettings::default()).unwrap();
        assert!(rel(curve.stresses[0] / curve.strains[0], oracle) < 1e-3);
    }
}

fn random_field(seed: u64, n: usize) -> OrientationField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grains: Vec<f64> = (0..6).map(|_| rng.gen_range(-180.0..180.0)).collect();
    let angles = (0..n * n).map(|i| grains[(i / n * 3 / n) * 2 + (i % n) * 2 / n]).collect();
    OrientationField::new(n, n, angles).unwrap()
}

#[test]
fn quarter_turn_field_gives_the_same_curve() {
    let mat = MaterialParams::aluminum();
    let load = LoadCase::tension(0.01);
    let field = random_field(3, 6);
    let turned = OrientationField::new(6, 6, field.angles.iter().map(|a| a + 90.0).collect()).unwrap();
    let a = simulate(&field, &mat, &load, &SolverSettings::default()).unwrap();
    let b = simulate(&turned, &mat, &load, &SolverSettings::default()).unwrap();
    for (x, y) in a.curve.stresses.iter().zip(&b.curve.stresses) {
        assert!(rel(*y, *x) < 1e-8);
    }
    assert!(a.stats.max_det_fp_error < 1e-8);
}

#[test]
fn rve_tension_is_monotone_and_uniformly_sampled() {
    let mat = MaterialParams::aluminum();
    let load = LoadCase::tension(0.01);
    let sim = simulate(&random_field(8, 8), &mat, &load, &SolverSettings::default()).unwrap();
    let c = &sim.curve;
    assert_eq!(c.len(), 50);
    assert!(c.times[0] > 0.0);
    for k in 1..c.len() {
        assert!((c.times[k] - c.times[k - 1] - 0.02).abs() < 1e-12);
        assert!(c.stresses[k] >= c.stresses[k - 1], "step {k}");
    }
    assert!((c.strains[49] - 0.01).abs() < 1e-15);
    for st in &sim.final_states {
        assert!(st.g.iter().all(|&g| g >= mat.g0 && g <= mat.gmax));
    }
}

#[test]
fn mirror_orientations_agree_under_tension() {
    let mat = MaterialParams::aluminum();
    let load = LoadCase::tension(0.01);
    let s = SolverSettings::default();
    for theta in [14.6, 38.9, 72.97] {
        let a = run_simulation(&OrientationField::uniform(1, 1, theta), &mat, &load, &s).unwrap();
        let b = run_simulation(&OrientationField::uniform(1, 1, 180.0 - theta), &mat, &load, &s).unwrap();
        for (x, y) in a.stresses.iter().zip(&b.stresses) {
            assert!(rel(*y, *x) < 1e-6);
        }
    }
}

#[test]
fn shear_and_cyclic_run() {
    let mat = MaterialParams::copper();
    let shear = run_simulation(&OrientationField::uniform(1, 1, 5.0), &mat, &LoadCase::shear(0.02), &SolverSettings::default()).unwrap();
    assert!(shear.stresses.iter().all(|s| *s > 0.0));
    let cyc = run_simulation(&OrientationField::uniform(1, 1, 5.0), &mat, &LoadCase::cyclic(0.00125), &SolverSettings::default()).unwrap();
    assert_eq!(cyc.len(), 240);
    assert!(cyc.stresses.iter().any(|s| *s > 0.0) && cyc.stresses.iter().any(|s| *s < 0.0));
}

#[test]
fn dt_underflow_is_a_simulation_error() {
    let mat = MaterialParams::aluminum();
    let load = LoadCase { dt_min: 1e-2, ..LoadCase::tension(0.01) };
    let mut settings = SolverSettings::default();
    settings.local.max_iterations = 0;
    let err = run_simulation(&OrientationField::uniform(1, 1, 0.0), &mat, &load, &settings).unwrap_err();
    assert!(matches!(err, Error::Simulation(ref m) if m.contains("underflow")), "{err}");
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(OrientationField::new(2, 2, vec![0.0; 3]).is_err());
    let bad_load = LoadCase { dt_min: 1.0, ..LoadCase::tension(0.01) };
    let mat = MaterialParams::aluminum();
    assert!(run_simulation(&OrientationField::uniform(1, 1, 0.0), &mat, &bad_load, &SolverSettings::default()).is_err());
    let vm_cyclic = LoadCase { output_quantity: OutputQuantity::VonMises, ..LoadCase::cyclic(0.001) };
    assert!(vm_cyclic.validate().is_err());
}

#[test]
fn curve_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let c = ResponseCurve::new(vec![0.1, 0.2], vec![1e-3, 2e-3], vec![std::f64::consts::PI, -0.1]).unwrap();
    let p = dir.path().join("c.csv");
    c.save_csv(&p).unwrap();
    assert!(std::fs::read_to_string(&p).unwrap().starts_with("time_s,strain,stress_mpa\n"));
    assert_eq!(ResponseCurve::load_csv(&p).unwrap(), c);
}
