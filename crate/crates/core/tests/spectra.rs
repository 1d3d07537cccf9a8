use locg::mtx::{load_matrix_market, write_matrix_market, LoadedMatrix};
use locg::problems::{
    cluster_outlier_values, conjugate_spectrum, laplacian2d, outlier_cluster_sized, outlier_cluster_values, start_block,
};
use locg::{dense_eigh, laplacian2d_spectrum, HermitianOperator};
use nalgebra::DMatrix;
use proptest::prelude::*;

#[test]
fn laplacian_dense_matches_two_cosine_formula() {
    let p = laplacian2d(10).unwrap();
    let (vals, vecs) = dense_eigh(&p.operator.dense().unwrap()).unwrap();
    // independent enumeration of -4 + 2 cos(i pi / 11) + 2 cos(j pi / 11)
    let h = std::f64::consts::PI / 11.0;
    let mut expected: Vec<f64> =
        (1..=10).flat_map(|i| (1..=10).map(move |j| -4.0 + 2.0 * (i as f64 * h).cos() + 2.0 * (j as f64 * h).cos())).collect();
    expected.sort_by(f64::total_cmp);
    for (a, b) in vals.iter().zip(&expected) {
        assert!((a - b).abs() <= 1e-10);
    }
    assert_eq!(laplacian2d_spectrum(10).len(), 100);
    assert!((vecs.transpose() * &vecs - DMatrix::identity(100, 100)).abs().max() <= 1e-10);
}

#[test]
fn synthetic_spectra_survive_conjugation() {
    for values in [outlier_cluster_values(120), cluster_outlier_values(120)] {
        let op = conjugate_spectrum(&values, 5).unwrap();
        let (got, _) = dense_eigh(op.matrix()).unwrap();
        let mut want = values.clone();
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn seeds_are_deterministic_and_distinct() {
    let a1 = outlier_cluster_sized(60, 1).unwrap().operator.dense().unwrap();
    let a2 = outlier_cluster_sized(60, 1).unwrap().operator.dense().unwrap();
    let b = outlier_cluster_sized(60, 2).unwrap().operator.dense().unwrap();
    assert_eq!(a1, a2);
    assert!((a1 - b).abs().max() > 1e-3);
    assert_eq!(start_block(60, 2, 9).unwrap(), start_block(60, 2, 9).unwrap());
    assert!((start_block(60, 2, 1).unwrap() - start_block(60, 2, 2).unwrap()).abs().max() > 1e-3);
}

#[test]
fn matrix_market_round_trip() {
    let p = laplacian2d(4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lap4.mtx");
    write_matrix_market(&path, &*p.operator).unwrap();
    let LoadedMatrix::Real(op) = load_matrix_market(&path).unwrap() else { panic!("expected a real matrix") };
    let (a, _) = dense_eigh(&p.operator.dense().unwrap()).unwrap();
    let (b, _) = dense_eigh(&op.dense().unwrap()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conjugation_preserves_random_spectra(seed in 0u64..10_000, vals in prop::collection::vec(-50.0f64..50.0, 4..24)) {
        let op = conjugate_spectrum(&vals, seed).unwrap();
        let (got, vecs) = dense_eigh(op.matrix()).unwrap();
        let mut want = vals.clone();
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-10 * 50.0);
        }
        let k = vals.len();
        prop_assert!((vecs.transpose() * &vecs - DMatrix::identity(k, k)).abs().max() <= 1e-10);
    }

    #[test]
    fn laplacian_extremes_mirror(grid in 2usize..40) {
        let s = laplacian2d_spectrum(grid);
        prop_assert!((s[0] + s[s.len() - 1] + 8.0).abs() <= 1e-12);
    }
}
