mod common;

use common::*;
use grmssvdd::linalg::orthonormalize_rows;
use grmssvdd::regularizers::{omega_gradient, omega_value, Operands};
use grmssvdd::Regularizer;
use nalgebra::DMatrix;
use proptest::prelude::*;

#[test]
fn gradients_match_finite_differences() {
    let mut r = rng(11);
    for reg in Regularizer::ALL {
        for trial in 0..5 {
            let n = 3 + trial;
            let p = random_problem(&mut r, reg, 3, n, 1 + trial % 3);
            for m in 0..3 {
                let g = omega_gradient(reg, m, &p.ops()).unwrap();
                let fd = fd_gradient(reg, m, &p);
                let err = rel_err(&g, &fd, 1e-8);
                assert!(err < 1e-4, "{reg} m={m}: relative error {err}");
            }
        }
    }
}

#[test]
fn hand_trace_value() {
    let q = vec![DMatrix::from_element(1, 1, 1.0)];
    let x = vec![DMatrix::from_row_slice(1, 2, &[1.0, 2.0])];
    let alpha = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
    let ops = Operands {
        q: &q,
        x: &x,
        alpha: &alpha,
        c: 1.0,
        laplacians: &[],
    };
    assert_eq!(omega_value(Regularizer::new(1).unwrap(), &ops).unwrap(), 9.0);
    assert_eq!(omega_value(Regularizer::new(0).unwrap(), &ops).unwrap(), 0.0);
    let zero_l = vec![DMatrix::zeros(2, 2)];
    let ops7 = Operands { laplacians: &zero_l, ..ops };
    assert_eq!(omega_value(Regularizer::new(7).unwrap(), &ops7).unwrap(), 0.0);
}

#[test]
fn crossed_equals_plain_with_one_modality() {
    let mut r = rng(3);
    for (plain, crossed) in [(1, 4), (2, 5), (3, 6)] {
        let (plain, crossed) = (Regularizer::new(plain).unwrap(), Regularizer::new(crossed).unwrap());
        let p = random_problem(&mut r, plain, 1, 6, 2);
        assert_eq!(
            omega_gradient(plain, 0, &p.ops()).unwrap(),
            omega_gradient(crossed, 0, &p.ops()).unwrap()
        );
        assert_eq!(omega_value(plain, &p.ops()).unwrap(), omega_value(crossed, &p.ops()).unwrap());
    }
}

fn rotation(seed: u64, d: usize) -> DMatrix<f64> {
    orthonormalize_rows(&gaussian(&mut rng(seed), d, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn invariant_under_shared_rotation(seed in 0u64..10_000, id in prop::sample::select(vec![0u8, 1, 2, 3, 7, 8, 9]), d in 1usize..=3) {
        let reg = Regularizer::new(id).unwrap();
        let mut r = rng(seed);
        let p = random_problem(&mut r, reg, 3, 7, d);
        let rot = rotation(seed ^ 0xABCD, d);
        let rotated = p.with_q(p.q.iter().map(|q| &rot * q).collect());
        let a = omega_value(reg, &p.ops()).unwrap();
        let b = omega_value(reg, &rotated.ops()).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn graph_regularizers_nonnegative(seed in 0u64..10_000, id in 7u8..=9, n in 3usize..=10) {
        let reg = Regularizer::new(id).unwrap();
        let p = random_problem(&mut rng(seed), reg, 3, n, 2);
        prop_assert!(omega_value(reg, &p.ops()).unwrap() >= -1e-10);
    }
}
