mod common;

use common::*;
use mnlab_core::linalg::{
    cholesky, is_psd, loewner_leq, sym_eigen, sym_eigenvalues, Matrix, SymMatrix,
};
use proptest::prelude::*;

fn sym_of(m: &Matrix) -> SymMatrix {
    m.symmetric_part().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn trace_product_bounded_by_top_eigenvalue(seed in any::<u64>(), n in 1usize..=32) {
        let mut r = rng(seed);
        let a = random_psd(&mut r, n, 1 + n / 2);
        let b = random_psd(&mut r, n, n);
        let tr_ab = a.matmul(b.as_matrix()).unwrap().trace();
        let top = sym_eigenvalues(&a).unwrap()[0];
        prop_assert!(tr_ab <= top * b.trace() + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dual_weyl_inequality(seed in any::<u64>(), n in 1usize..=16) {
        let mut r = rng(seed);
        let a = random_sym(&mut r, n);
        let b = random_sym(&mut r, n);
        let la = sym_eigenvalues(&a).unwrap();
        let lb = sym_eigenvalues(&b).unwrap();
        let lab = sym_eigenvalues(&a.add(&b).unwrap()).unwrap();
        // descending, 1-based λ_k = values[k − 1]
        for rr in 0..n {
            for s in 0..n - rr {
                if n - rr - s < 1 {
                    continue;
                }
                let lhs = lab[n - rr - s - 1];
                let rhs = la[n - rr - 1] + lb[n - s - 1];
                prop_assert!(lhs >= rhs - 1e-9, "r={rr} s={s}: {lhs} < {rhs}");
            }
        }
    }

    #[test]
    fn cross_terms_dominated_by_squares(seed in any::<u64>(), rows in 1usize..=12, cols in 1usize..=12) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, rows, cols);
        let b = random_matrix(&mut r, rows, cols);
        let at = a.transpose();
        let bt = b.transpose();
        let cross = at.matmul(&b).unwrap().add(&bt.matmul(&a).unwrap()).unwrap();
        let squares = at.matmul(&a).unwrap().add(&bt.matmul(&b).unwrap()).unwrap();
        prop_assert!(loewner_leq(&sym_of(&cross), &sym_of(&squares), 1e-9).unwrap());
    }

    #[test]
    fn symmetrised_frobenius_sandwich(seed in any::<u64>(), n in 1usize..=20) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, n, n);
        let s = a.add(&a.transpose()).unwrap();
        let tr_a2 = a.matmul(&a).unwrap().trace();
        let mid = s.frobenius_norm().powi(2);
        let fa = a.frobenius_norm().powi(2);
        prop_assert!(4.0 * tr_a2 <= mid + 1e-9 * mid.max(1.0));
        prop_assert!(mid <= 4.0 * fa + 1e-9 * fa.max(1.0));
    }

    #[test]
    fn congruence_preserves_loewner_norm_order(seed in any::<u64>(), n in 1usize..=12, k in 1usize..=12) {
        let mut r = rng(seed);
        let a = random_psd(&mut r, n, n);
        let b = a.add(&random_psd(&mut r, n, 1 + n / 3)).unwrap();
        let x = random_matrix(&mut r, n, k);
        let lo = a.congruence(&x).unwrap().frobenius_norm();
        let hi = b.congruence(&x).unwrap().frobenius_norm();
        prop_assert!(lo <= hi * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn cholesky_round_trip(seed in any::<u64>(), n in 1usize..=40) {
        let mut r = rng(seed);
        let m = random_spd(&mut r, n, 0.1);
        let l = cholesky(&m).unwrap();
        let back = l.matmul(&l.transpose()).unwrap();
        let err = back.sub(m.as_matrix()).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-10 * m.frobenius_norm());
    }

    #[test]
    fn jacobi_reconstructs_input(seed in any::<u64>(), n in 1usize..=24) {
        let mut r = rng(seed);
        let m = random_sym(&mut r, n);
        let e = sym_eigen(&m, 1e-12).unwrap();
        let v = &e.vectors;
        let d = Matrix::from_diagonal(&e.values);
        let back = v.matmul(&d).unwrap().matmul(&v.transpose()).unwrap();
        prop_assert!(back.max_abs_diff(m.as_matrix()) < 1e-10);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn psd_classification_matches_spectrum(seed in any::<u64>(), n in 1usize..=16, shift in -1.0f64..1.0) {
        let mut r = rng(seed);
        let m = random_psd(&mut r, n, n).shifted(shift);
        let min = *sym_eigenvalues(&m).unwrap().last().unwrap();
        let s = 1e-9 * m.frobenius_norm();
        if min > 10.0 * s {
            prop_assert!(is_psd(&m, 1e-9));
        }
        if min < -10.0 * s {
            prop_assert!(!is_psd(&m, 1e-9));
        }
    }
}

#[test]
fn zero_matrix_is_psd() {
    assert!(is_psd(&SymMatrix::zeros(5), 1e-9));
}

#[test]
fn eigenvalues_of_denormal_coupling() {
    let mut m = Matrix::zeros(4, 4);
    m[(2, 3)] = 5e-324;
    m[(3, 2)] = 5e-324;
    m[(0, 0)] = 1.0;
    let v = sym_eigenvalues(&SymMatrix::from_matrix(m).unwrap()).unwrap();
    assert_eq!(v.iter().filter(|x| x.abs() < 1e-300).count(), 3);
}
