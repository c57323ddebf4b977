use mnlab_core::hypothesis::*;
use mnlab_core::Error;
use proptest::prelude::*;

/// `c` that yields exactly `m` bumps.
fn c_for(m: usize, n: usize, alpha: f64, class: ModelClass) -> f64 {
    2.0 * (m as f64 - 1.0 + 0.5) / (n as f64).powf(class.bandwidth_exponent(alpha))
}

fn family(m: usize, alpha: f64, class: ModelClass, seed: u64) -> HypothesisFamily {
    let n = 1024;
    let f = build_family(n, alpha, 1.0, c_for(m, n, alpha, class), class, seed).unwrap();
    assert_eq!(f.m, m);
    f
}

#[test]
fn bump_supports_are_disjoint_and_inside_middle_half() {
    for m in [8, 9, 17, 40] {
        let f = family(m, 1.0, ModelClass::M1M2, 3);
        for w in f.centers.windows(2) {
            assert!(w[1] - w[0] >= f.h * (1.0 - 1e-12));
        }
        assert!(f.centers[0] - 0.5 * f.h >= 0.25 - 1e-12);
        assert!(f.centers[m - 1] + 0.5 * f.h <= 0.75 + 1e-12);
    }
}

#[test]
fn separation_matches_closed_form_and_threshold() {
    for &alpha in &[0.6, 1.0, 1.5, 2.0] {
        let f = family(12, alpha, ModelClass::M1M2, 5);
        let threshold = (f.amplitude() * f.kernel.l2_sq().sqrt() / 16.0).powi(2);
        for i in 0..f.len() {
            for j in (i + 1)..f.len() {
                let sep = l2_separation(&f, i, j).unwrap();
                let closed = f.separation_closed_form(i, j).unwrap();
                assert!((sep - closed).abs() <= 1e-8 * closed, "alpha {alpha}: {sep} vs {closed}");
                assert!(sep >= threshold);
            }
        }
    }
}

#[test]
fn every_hypothesis_lies_in_holder_class() {
    for &alpha in &[0.6, 1.0, 1.5, 2.0] {
        for class in [ModelClass::M1M2, ModelClass::M3] {
            let f = family(10, alpha, class, 11);
            for i in 0..f.len() {
                let p = f.profile(i).unwrap();
                let (order, _) = holder_order(alpha);
                let rep = holder_report(
                    |t| p.eval(t),
                    |t| p.derivative(order, t),
                    alpha,
                    f.l_const,
                    SEMINORM_GRID,
                    Some((1.0, f.upper_bound() * (1.0 + 1e-12))),
                );
                assert!(rep.pass, "alpha {alpha} word {i}: seminorm {}", rep.seminorm);
                assert!(rep.min >= 1.0);
            }
        }
    }
}

#[test]
fn finite_difference_membership_agrees() {
    let f = family(8, 1.0, ModelClass::M1M2, 1);
    let p = f.profile(1).unwrap();
    assert!(holder_check(|t| p.eval(t), 1.0, 1.0, 1001));
    assert!(!holder_check(|t| 1.0 + 3.0 * t, 1.0, 1.0, 1001));
}

#[test]
fn families_are_deterministic_in_seed() {
    let a = family(30, 1.0, ModelClass::M1M2, 42).descriptor();
    let b = family(30, 1.0, ModelClass::M1M2, 42).descriptor();
    assert_eq!(a, b);
}

#[test]
fn too_few_bumps_is_rejected() {
    assert!(matches!(
        build_family(1024, 1.0, 1.0, 0.5, ModelClass::M1M2, 0),
        Err(Error::TooFewBumps { .. })
    ));
    assert!(matches!(vg_code(7, 0), Err(Error::TooFewBumps { m: 7 })));
}

#[test]
fn bump_count_formula() {
    assert_eq!(bump_count(1024, 1.0, 5.0, ModelClass::M1M2), 8);
    assert_eq!(bump_count(4096, 1.0, 2.0, ModelClass::M1M2), 5);
    assert_eq!(bump_count(4096, 1.0, 2.0, ModelClass::M3), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn code_meets_size_and_distance(m in 8usize..=64, seed in any::<u64>()) {
        let code = vg_code(m, seed).unwrap();
        let dist = m.div_ceil(8);
        prop_assert!(code.len() > 2f64.powf(m as f64 / 8.0).ceil() as usize);
        prop_assert!(code[0].iter().all(|&b| b == 0));
        for i in 0..code.len() {
            prop_assert_eq!(code[i].len(), m);
            for j in (i + 1)..code.len() {
                prop_assert!(hamming(&code[i], &code[j]) >= dist);
            }
        }
        prop_assert_eq!(vg_code(m, seed).unwrap(), code);
    }
}
