mod common;

use common::rel;
use proptest::prelude::*;
use xtalnet::basis::*;
use xtalnet::cpfem::{LoadCase, MaterialParams, SolverSettings};
use xtalnet::Error;

fn fixture(curves: Vec<Vec<f64>>, strains: Vec<f64>) -> BasisSet {
    let t = strains.len();
    BasisSet {
        orientations_deg: (0..curves.len()).map(|i| i as f64).collect(),
        times: (1..=t).map(|k| k as f64 / t as f64).collect(),
        strains,
        stresses: curves,
        material: MaterialParams::aluminum(),
        load: LoadCase::tension(0.01),
    }
}

#[test]
fn orientation_samples_match_listed_angles() {
    let a = orientation_samples();
    assert_eq!(a.len(), 36);
    assert_eq!(format!("{:.2}", a[0]), "4.86");
    assert_eq!(format!("{:.2}", a[1]), "9.73");
    assert_eq!(format!("{:.2}", a[2]), "14.59");
    assert_eq!(format!("{:.2}", a[35]), "175.14");
    assert!(a.iter().all(|&x| x > 0.0 && x < 180.0));
    for (i, x) in a.iter().enumerate() {
        assert_eq!(*x, (i + 1) as f64 * 180.0 / 37.0);
    }
}

#[test]
fn mixtures_of_identical_members() {
    let c = vec![10.0, 18.0, 22.0, 24.0];
    let b = fixture(vec![c.clone(); 3], vec![0.001, 0.002, 0.003, 0.004]);
    assert_eq!(voigt_curve(&b).unwrap().stresses, c);
    let r = reuss_curve(&b).unwrap().stresses;
    for (x, y) in r.iter().zip(&c) {
        assert!((x - y).abs() < 1e-12);
    }
    let (lo, hi) = envelope(&b).unwrap();
    assert_eq!(lo.stresses, hi.stresses);
}

#[test]
fn two_member_mixtures() {
    let b = fixture(vec![vec![10.0, 11.0], vec![20.0, 21.0]], vec![0.1, 0.2]);
    assert_eq!(voigt_curve(&b).unwrap().stresses[0], 15.0);

    let (e1, e2) = (70.0e3, 120.0e3);
    let strains: Vec<f64> = (1..=5).map(|k| k as f64 * 1e-4).collect();
    let lin = |e: f64| strains.iter().map(|s| e * s).collect::<Vec<_>>();
    let b = fixture(vec![lin(e1), lin(e2)], strains.clone());
    let r = reuss_curve(&b).unwrap();
    let harmonic = 2.0 * e1 * e2 / (e1 + e2);
    assert!(rel(elastic_slope(&r), harmonic) < 1e-12);
    assert!(elastic_slope(&r) <= elastic_slope(&voigt_curve(&b).unwrap()));
}

#[test]
fn reuss_rejects_non_monotone_members() {
    let b = fixture(vec![vec![1.0, 2.0, 1.5], vec![1.0, 2.0, 3.0]], vec![0.1, 0.2, 0.3]);
    assert!(matches!(reuss_curve(&b), Err(Error::Contract(_))));
}

/// Increasing, concave members (hardening shape).
fn monotone_members() -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(0.01f64..5.0, 6), 2..8).prop_map(|incs| {
        incs.into_iter()
            .map(|mut inc| {
                inc.sort_by(|a, b| b.total_cmp(a));
                inc.iter()
                    .scan(0.0, |acc, d| {
                        *acc += d;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn mixtures_stay_inside_the_envelope(curves in monotone_members()) {
        let strains = (1..=6).map(|k| k as f64 * 1e-3).collect();
        let b = fixture(curves, strains);
        let (lo, hi) = envelope(&b).unwrap();
        let v = voigt_curve(&b).unwrap();
        let r = reuss_curve(&b).unwrap();
        for t in 0..6 {
            let tol = 1e-12 * hi.stresses[t].abs();
            prop_assert!(lo.stresses[t] <= v.stresses[t] + tol && v.stresses[t] <= hi.stresses[t] + tol);
            prop_assert!(lo.stresses[t] <= r.stresses[t] + tol && r.stresses[t] <= hi.stresses[t] + tol);
        }
        prop_assert!(elastic_slope(&r) <= elastic_slope(&v) * (1.0 + 1e-12));
    }
}

#[test]
fn aluminum_tension_basis() {
    let b = generate_basis(&MaterialParams::aluminum(), &LoadCase::tension(0.01), &SolverSettings::default()).unwrap();
    assert_eq!(b.stresses.len(), 36);
    assert_eq!(b.n_steps(), 50);
    for s in &b.stresses {
        assert!(s.windows(2).all(|w| w[1] >= w[0]));
    }
    // θ and 180° − θ are members i and 35 − i
    for i in 0..18 {
        for (x, y) in b.stresses[i].iter().zip(&b.stresses[35 - i]) {
            assert!(rel(*y, *x) < 1e-6, "member {i}");
        }
    }
    let v = voigt_curve(&b).unwrap();
    let r = reuss_curve(&b).unwrap();
    let (lo, hi) = envelope(&b).unwrap();
    for t in 0..50 {
        assert!(lo.stresses[t] <= v.stresses[t] && v.stresses[t] <= hi.stresses[t]);
    }
    assert!(elastic_slope(&r) <= elastic_slope(&v));

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("basis.csv");
    b.save(&p).unwrap();
    assert_eq!(BasisSet::load(&p).unwrap(), b);
}

#[test]
fn isotropic_members_share_the_elastic_slope() {
    let mut mat = MaterialParams::copper();
    mat.c44 = 0.5 * (mat.c11 - mat.c12);
    let load = LoadCase { n_output_steps: 5, ..LoadCase::tension(1e-5) };
    let b = generate_basis(&mat, &load, &SolverSettings::default()).unwrap();
    let s0 = elastic_slope(&b.member(0));
    for i in 1..36 {
        assert!(rel(elastic_slope(&b.member(i)), s0) < 1e-6);
    }
}

#[test]
fn cyclic_basis_has_no_iso_stress_mixture() {
    let load = LoadCase { step_time: 0.6, n_output_steps: 48, ..LoadCase::cyclic(0.00125) };
    let load = LoadCase { n_cycles: 0.3, ..load };
    let b = generate_basis(&MaterialParams::copper(), &load, &SolverSettings::default()).unwrap();
    assert!(voigt_curve(&b).is_ok());
    assert!(matches!(reuss_curve(&b), Err(Error::Contract(_))));
}
