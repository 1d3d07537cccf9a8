use locg::linalg::{orthonormalize, rayleigh_quotient, residual};
use locg::problems::{haar_orthonormal, outlier_cluster_sized};
use locg::{dense_eigh, DenseOperator, HermitianOperator};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, k, |_, _| rng.sample(StandardNormal))
}

fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let g = gaussian(n, n, seed);
    (&g + g.transpose()) * 0.5
}

#[test]
fn gram_schmidt_spans_householder_range() {
    let b = gaussian(50, 6, 11);
    let (q, rank) = orthonormalize(&b, 1e-10).unwrap();
    assert_eq!(rank, 6);
    let defect = (q.transpose() * &q - DMatrix::identity(6, 6)).abs().max();
    assert!(defect <= 1e-12, "{defect}");
    // Householder QR is the reference; same column space means each basis
    // projects the other onto itself.
    let h = b.clone().qr().q();
    let proj = &h * (h.transpose() * &q);
    assert!((proj - &q).abs().max() <= 1e-12);
}

#[test]
fn rayleigh_quotient_matches_dense_product() {
    let p = outlier_cluster_sized(200, 3).unwrap();
    let x = haar_orthonormal(200, 2, 4).unwrap();
    let a = p.operator.dense().unwrap();
    let reference = x.transpose() * &a * &x;
    let rq = rayleigh_quotient(&*p.operator, &x).unwrap();
    assert!((rq - reference).abs().max() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ritz_values_invariant_under_basis_change(seed in 0u64..10_000, n in 6usize..20, k in 1usize..4) {
        let op = DenseOperator::new(random_symmetric(n, seed)).unwrap();
        let x = gaussian(n, k, seed + 1);
        let mut t = gaussian(k, k, seed + 2);
        for i in 0..k {
            t[(i, i)] += 3.0;
        }
        let (e1, _) = dense_eigh(&rayleigh_quotient(&op, &x).unwrap()).unwrap();
        let (e2, _) = dense_eigh(&rayleigh_quotient(&op, &(&x * &t)).unwrap()).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn unit_modulus_scaling_leaves_quotient(seed in 0u64..10_000, n in 4usize..16) {
        let op = DenseOperator::new(random_symmetric(n, seed)).unwrap();
        let x = gaussian(n, 2, seed + 7);
        let c = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0]));
        let r1 = rayleigh_quotient(&op, &x).unwrap();
        let r2 = rayleigh_quotient(&op, &(&x * &c)).unwrap();
        let (e1, _) = dense_eigh(&r1).unwrap();
        let (e2, _) = dense_eigh(&r2).unwrap();
        prop_assert!((e1[0] - e2[0]).abs() <= 1e-12 * e1[0].abs().max(1.0));
        prop_assert!((r1[(0, 0)] - r2[(0, 0)]).abs() <= 1e-12 * r1[(0, 0)].abs().max(1.0));
    }

    #[test]
    fn residual_orthogonal_to_block(seed in 0u64..10_000, n in 5usize..20, k in 1usize..4, squeeze in 0.0f64..1.0) {
        let op = DenseOperator::new(random_symmetric(n, seed)).unwrap();
        let mut x = gaussian(n, k, seed + 3);
        if k > 1 {
            // push the last column toward the first, staying above the rank threshold
            let first = x.column(0).into_owned();
            let eps = 10f64.powf(-6.0 * squeeze);
            let last = x.column(k - 1).into_owned();
            x.set_column(k - 1, &(first + last * eps));
        }
        let r = residual(&op, &x).unwrap();
        prop_assert!(r.iter().all(|v| v.is_finite()));
        let scale = op.scale() * x.norm();
        prop_assert!((x.transpose() * &r).abs().max() <= 1e-9 * scale);
    }

    #[test]
    fn orthonormalized_blocks_are_finite_and_orthonormal(seed in 0u64..10_000, n in 8usize..40, k in 1usize..6) {
        let b = gaussian(n, k, seed);
        let (q, rank) = orthonormalize(&b, 1e-10).unwrap();
        prop_assert_eq!(rank, k);
        prop_assert!(q.iter().all(|v| v.is_finite()));
        prop_assert!((q.transpose() * &q - DMatrix::identity(k, k)).abs().max() <= 1e-12);
    }
}
