mod common;

use common::*;
use grmssvdd::graphs::{build_laplacian, GraphKind};
use grmssvdd::linalg::max_abs_diff;
use grmssvdd::npt::{center_kernel, fit_npt, map_test, rbf_kernel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn check_npt(seed: u64, dim: usize, n: usize, sigma: f64) {
    let x = gaussian(&mut rng(seed), dim, n);
    let model = fit_npt(&x, sigma).unwrap();
    let khat = center_kernel(&rbf_kernel(&x, &x, sigma).unwrap()).unwrap();
    let gram = model.phi_train.transpose() * &model.phi_train;
    assert!(max_abs_diff(&gram, &khat) < 1e-6, "gram vs centered kernel");
    let mapped = map_test(&model, &x).unwrap();
    assert!(max_abs_diff(&mapped, &model.phi_train) < 1e-6, "training map");
}

#[test]
fn npt_reproduces_centered_kernel() {
    for seed in 0..20 {
        check_npt(seed, 1 + seed as usize % 5, 3 + seed as usize % 12, [0.5, 1.0, 3.0, 10.0][seed as usize % 4]);
    }
}

#[test]
fn near_orthogonal_kernel_maps_training_points() {
    // narrow kernel: eigenvalues cluster around 1
    check_npt(78402, 5, 6, 0.32518434780500305);
}

#[test]
fn duplicate_points_map_identically() {
    // two copies of a training point map to the same feature vector
    let x = gaussian(&mut rng(4), 3, 8);
    let model = fit_npt(&x, 2.0).unwrap();
    let pair = DMatrix::from_columns(&[x.column(2).into_owned(), x.column(2).into_owned()]);
    let m = map_test(&model, &pair).unwrap();
    assert!((m.column(0) - m.column(1)).amax() < 1e-12);
}

fn laplacian_algebra(kind: GraphKind, x: &DMatrix<f64>, k: usize, seed: u64) {
    let l = build_laplacian(kind, x, k, seed).unwrap().matrix;
    let n = x.ncols();
    assert!(max_abs_diff(&l, &l.transpose()) < 1e-12, "{kind:?} symmetric");
    let ones = DVector::from_element(n, 1.0);
    assert!((&l * ones).amax() < 1e-8, "{kind:?} annihilates constants");
    let min_eig = l.clone().symmetric_eigenvalues().min();
    assert!(min_eig > -1e-8, "{kind:?} PSD, min eig {min_eig}");
    if kind == GraphKind::WithinCluster {
        assert!(max_abs_diff(&(&l * &l), &l) < 1e-10, "within-cluster idempotent");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn laplacians_are_symmetric_psd(seed in 0u64..100_000, n in 2usize..=25, dim in 1usize..=6, k in 0usize..=6) {
        let x = gaussian(&mut rng(seed), dim, n);
        let k = k.min(n - 1);
        for kind in [GraphKind::Knn, GraphKind::WithinCluster, GraphKind::BetweenCluster] {
            laplacian_algebra(kind, &x, k, seed);
        }
    }

    #[test]
    fn npt_gram_property(seed in 0u64..100_000, n in 2usize..=15, dim in 1usize..=5, sigma in 0.3f64..20.0) {
        check_npt(seed, dim, n, sigma);
    }
}
