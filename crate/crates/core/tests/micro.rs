use std::path::Path;

use proptest::prelude::*;
use xtalnet::micro::*;
use xtalnet::Error;

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn one_grain_covers_everything() {
    let m = generate_microstructure(5, 7, 9, 1).unwrap();
    assert!(m.grain_id.iter().all(|&g| g == 0));
    let f = m.orientation_field();
    assert!(f.angles.iter().all(|&a| a == m.orientation_deg[0]));
}

#[test]
fn saturated_grid_has_one_grain_per_voxel() {
    let m = generate_microstructure(11, 4, 5, 20).unwrap();
    let mut ids = m.grain_id.clone();
    ids.sort();
    assert_eq!(ids, (0..20).collect::<Vec<_>>());
}

#[test]
fn generation_is_deterministic() {
    let a = generate_microstructure(42, 16, 16, 8).unwrap();
    let b = generate_microstructure(42, 16, 16, 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, generate_microstructure(43, 16, 16, 8).unwrap());
}

#[test]
fn grain_count_out_of_range() {
    assert!(matches!(generate_microstructure(1, 4, 4, 0), Err(Error::Argument(_))));
    assert!(matches!(generate_microstructure(1, 4, 4, 17), Err(Error::Argument(_))));
}

#[test]
fn orientation_field_lookup() {
    let single = Microstructure { height: 3, width: 3, grain_id: vec![0; 9], orientation_deg: vec![30.0], physical_size: 1.0 };
    assert_eq!(single.orientation_field().angles, vec![30.0; 9]);
    let halves = Microstructure {
        height: 2,
        width: 4,
        grain_id: vec![0, 0, 1, 1, 0, 0, 1, 1],
        orientation_deg: vec![0.0, 90.0],
        physical_size: 1.0,
    };
    assert_eq!(halves.orientation_field().angles, vec![0.0, 0.0, 90.0, 90.0, 0.0, 0.0, 90.0, 90.0]);
}

#[test]
fn normalization_cases() {
    assert_eq!(normalize_orientations(&[-180.0, 180.0, 0.0]).unwrap(), vec![0.0, 1.0, 0.5]);
    let v = normalize_orientations(&[4.86]).unwrap()[0];
    assert!((v - 0.5135).abs() < 1e-12);
    assert!(normalize_orientations(&[180.5]).is_err());
}

proptest! {
    #[test]
    fn voronoi_assignment_is_nearest(seed in 0u64..500, h in 1usize..20, w in 1usize..20, frac in 0.0f64..1.0) {
        let n = 1 + ((h * w - 1) as f64 * frac) as usize;
        let m = generate_microstructure(seed, h, w, n).unwrap();
        prop_assert!(m.validate().is_ok());
        prop_assert_eq!(m.n_grains(), n);
        // brute-force nearest seed, ties to the lowest id
        let seeds = reference_seeds(seed, h, w, n);
        for r in 0..h {
            for c in 0..w {
                let d = |s: (usize, usize)| (c as i64 - s.0 as i64).pow(2) + (r as i64 - s.1 as i64).pow(2);
                let best = (0..n).map(|g| d(seeds[g])).min().unwrap();
                let g = m.grain_id[r * w + c];
                prop_assert_eq!(d(seeds[g]), best);
                prop_assert!((0..g).all(|k| d(seeds[k]) > best));
            }
        }
        prop_assert!(m.orientation_deg.iter().all(|a| (-180.0..=180.0).contains(a)));
    }

    #[test]
    fn normalization_round_trip(a in -180.0f64..=180.0) {
        let v = normalize_orientations(&[a]).unwrap();
        prop_assert!((0.0..=1.0).contains(&v[0]));
        prop_assert!((denormalize_orientations(&v)[0] - a).abs() < 1e-12);
    }

    #[test]
    fn pmic_round_trip(seed in 0u64..1000, h in 1usize..12, w in 1usize..12) {
        let m = generate_microstructure(seed, h, w, 1 + (seed as usize % (h * w))).unwrap();
        let back = parse_pmic(&to_pmic(&m), Path::new("mem.pmic")).unwrap();
        prop_assert_eq!(back, m);
    }
}

/// Same draw sequence as the generator: seed voxels first, then angles.
fn reference_seeds(seed: u64, h: usize, w: usize, n: usize) -> Vec<(usize, usize)> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, h * w, n).into_iter().map(|i| (i % w, i / w)).collect()
}

#[test]
fn pmic_file_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_microstructure(2, 16, 16, 10).unwrap();
    let p = dir.path().join("a.pmic");
    save_grid(&m, &p).unwrap();
    assert_eq!(load_grid(&p).unwrap(), m);

    let text = to_pmic(&m).replace("width 16", "width 15");
    match parse_pmic(&text, Path::new("x.pmic")) {
        Err(Error::Parse { line, .. }) => assert!(line > 5),
        other => panic!("{other:?}"),
    }
    let text = to_pmic(&m).replace("PMIC 1", "PMIC 2");
    assert!(matches!(parse_pmic(&text, Path::new("x.pmic")), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn structured_points_import() {
    let m = import_vtk(&fixture("three_grains.vtk"), &fixture("three_grains.ori")).unwrap();
    assert_eq!((m.height, m.width, m.n_grains()), (16, 16, 3));
    assert_eq!(m.orientation_deg, vec![-45.5, 10.0, 170.25]);
    assert_eq!(m.grain_id[0], 0);
    assert_eq!(m.grain_id[15], 1);
    assert_eq!(m.grain_id[15 * 16 + 15], 2);
    assert!((m.physical_size - 1.0).abs() < 1e-12);
}

#[test]
fn point_dimension_convention_is_accepted() {
    let text = std::fs::read_to_string(fixture("three_grains.vtk")).unwrap().replace("DIMENSIONS 16 16 1", "DIMENSIONS 17 17 2");
    let sp = parse_structured_points(&text, Path::new("p.vtk")).unwrap();
    assert_eq!(sp.cells, [16, 16, 1]);
}

#[test]
fn volume_files_are_rejected() {
    let err = import_vtk(&fixture("volume.vtk"), &fixture("three_grains.ori")).unwrap_err();
    assert!(err.to_string().contains("2D only"), "{err}");
}

#[test]
fn missing_orientation_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let ori = dir.path().join("short.ori");
    std::fs::write(&ori, "3 0\n7 1\n").unwrap();
    let err = import_vtk(&fixture("three_grains.vtk"), &ori).unwrap_err();
    assert!(matches!(err, Error::Parse { .. }) && err.to_string().contains("grain 12"), "{err}");
}

#[test]
fn count_mismatch_is_a_parse_error() {
    let text = std::fs::read_to_string(fixture("three_grains.vtk")).unwrap().replace("CELL_DATA 256", "CELL_DATA 200");
    assert!(matches!(parse_structured_points(&text, Path::new("p.vtk")), Err(Error::Parse { .. })));
}
