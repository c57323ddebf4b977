mod common;

use common::*;
use mnlab_core::covariance::*;
use mnlab_core::hypothesis::{build_family, ModelClass};
use mnlab_core::linalg::{is_psd, Matrix, SymMatrix};
use mnlab_core::profile::VolatilityProfile;
use proptest::prelude::*;

const MODELS: [Model; 5] = [Model::M1, Model::M2, Model::M3, Model::Mq(0.5), Model::Mq(2.0)];

fn max_rel(a: &SymMatrix, b: &SymMatrix) -> f64 {
    let scale = (0..a.n())
        .flat_map(|i| a.row(i).iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    a.max_abs_diff(b) / scale
}

/// `∫₀^x (x−u)^q (y−u)^q σ²(u) du` for `x ≤ y`, by Simpson after
/// `u = x(1 − s²)`, which removes the endpoint singularity.
fn oracle_entry(profile: &VolatilityProfile, q: f64, x: f64, y: f64) -> f64 {
    simpson(
        |s| {
            let u = x * (1.0 - s * s);
            let w = 2.0 * x * s;
            w * (x * s * s).powf(q) * (y - u).powf(q) * profile.eval(u)
        },
        0.0,
        1.0,
        4000,
    )
}

fn oracle_raw_signal(profile: &VolatilityProfile, q: f64, n: usize) -> SymMatrix {
    let nf = n as f64;
    SymMatrix::from_fn(n, |i, j| oracle_entry(profile, q, (i + 1) as f64 / nf, (j + 1) as f64 / nf))
}

fn wave() -> VolatilityProfile {
    VolatilityProfile::callable(
        |t| 1.5 + 0.5 * (3.0 * t).sin() + t * t,
        vec![0.0, 1.0],
        "smooth",
    )
    .unwrap()
}

fn conjugate(d: &Matrix, m: &SymMatrix) -> SymMatrix {
    let dm = d.matmul(m.as_matrix()).unwrap();
    dm.matmul(&d.transpose()).unwrap().symmetric_part().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn covariances_are_psd(seed in any::<u64>(), n in 1usize..=96, tau in 0.0f64..0.5, which in 0usize..5) {
        let mut r = rng(seed);
        let p = random_profile(&mut r);
        let model = MODELS[which];
        let raw = cov_raw(&ModelSpec::new(model, n, tau, Differencing::None).unwrap(), &p).unwrap();
        prop_assert!(is_psd(&raw, 1e-9));
        let d = cov_differenced(&ModelSpec::sufficient(model, n, tau).unwrap(), &p).unwrap();
        prop_assert!(is_psd(&d, 1e-9));
    }

    #[test]
    fn differenced_equals_conjugated_raw(seed in any::<u64>(), n in 1usize..=64, tau in 0.0f64..0.5, which in 0usize..5) {
        let mut r = rng(seed);
        let p = random_profile(&mut r);
        let model = MODELS[which];
        let spec = ModelSpec::sufficient(model, n, tau).unwrap();
        let raw = cov_raw(&spec.with_differencing(Differencing::None), &p).unwrap();
        let d = diff_matrix(&spec).unwrap();
        let direct = cov_differenced(&spec, &p).unwrap();
        prop_assert!(max_rel(&direct, &conjugate(&d, &raw)) < 1e-10);
    }

    #[test]
    fn differencing_is_invertible(seed in any::<u64>(), n in 1usize..=64, second in any::<bool>()) {
        let model = if second { Model::M3 } else { Model::M1 };
        let d = diff_matrix(&ModelSpec::sufficient(model, n, 0.1).unwrap()).unwrap();
        let mut r = rng(seed);
        let x = random_matrix(&mut r, n, 1).column(0);
        let y = d.matvec(&x).unwrap();
        // forward substitution on the lower-triangular D
        let mut back = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..i).map(|k| d[(i, k)] * back[k]).sum();
            back[i] = (y[i] - s) / d[(i, i)];
        }
        for i in 0..n {
            prop_assert!((back[i] - x[i]).abs() < 1e-12 * (1.0 + x[i].abs()) * n as f64);
        }
    }
}

#[test]
fn psd_at_largest_desk_size() {
    let p = wave();
    for model in [Model::M1, Model::M2, Model::M3] {
        let c = cov_differenced(&ModelSpec::sufficient(model, 512, 0.1).unwrap(), &p).unwrap();
        assert!(is_psd(&c, 1e-9), "{model:?}");
    }
    let c = cov_raw(&ModelSpec::new(Model::Mq(0.5), 128, 0.1, Differencing::None).unwrap(), &p).unwrap();
    assert!(is_psd(&c, 1e-9));
}

#[test]
fn raw_signal_matches_independent_quadrature() {
    let p = wave();
    for (model, q) in [(Model::M1, 0.0), (Model::M3, 1.0), (Model::Mq(0.5), 0.5), (Model::Mq(2.0), 2.0)] {
        for n in [1, 7, 24] {
            let spec = ModelSpec::new(model, n, 0.0, Differencing::None).unwrap();
            let got = signal_cov(&spec, &p).unwrap();
            let want = oracle_raw_signal(&p, q, n);
            assert!(max_rel(&got, &want) < 1e-9, "{model:?} n={n}: {}", max_rel(&got, &want));
        }
    }
}

#[test]
fn model_two_raw_matches_pointwise_formula() {
    let p = wave();
    let n = 16;
    let spec = ModelSpec::new(Model::M2, n, 0.2, Differencing::None).unwrap();
    let got = cov_raw(&spec, &p).unwrap();
    for i in 0..n {
        for j in 0..n {
            let (x, y) = ((i + 1) as f64 / n as f64, (j + 1) as f64 / n as f64);
            let want = p.eval(x).sqrt() * p.eval(y).sqrt() * x.min(y) + if i == j { 0.04 } else { 0.0 };
            assert!((got.get(i, j) - want).abs() < 1e-14);
        }
    }
}

#[test]
fn kernel_power_specialises() {
    let mut r = rng(11);
    for _ in 0..6 {
        let p = random_profile(&mut r);
        for n in [5, 33] {
            for (general, named) in [(Model::Mq(0.0), Model::M1), (Model::Mq(1.0), Model::M3)] {
                for diff in [Differencing::None, ModelSpec::sufficient(named, n, 0.1).unwrap().differencing] {
                    let a = cov_raw_or_diff(general, n, diff, &p);
                    let b = cov_raw_or_diff(named, n, diff, &p);
                    assert!(max_rel(&a, &b) < 1e-12);
                }
            }
        }
    }
}

fn cov_raw_or_diff(model: Model, n: usize, diff: Differencing, p: &VolatilityProfile) -> SymMatrix {
    let spec = ModelSpec::new(model, n, 0.1, diff).unwrap();
    if diff == Differencing::None {
        cov_raw(&spec, p).unwrap()
    } else {
        cov_differenced(&spec, p).unwrap()
    }
}

#[test]
fn model_two_decomposition_reconstructs() {
    let fam = build_family(64, 1.0, 1.0, 8.0, ModelClass::M1M2, 5).unwrap();
    for k in 0..fam.len() {
        let p = fam.profile(k).unwrap();
        let dec = model2_decomposition(&p, 64, 0.1).unwrap();
        let direct = cov_differenced(&ModelSpec::sufficient(Model::M2, 64, 0.1).unwrap(), &p).unwrap();
        assert!(max_rel(&dec.reconstruct(0.1).unwrap(), &direct) < 1e-12);
    }
}

#[test]
fn model_three_alternatives_dominate_null_within_diagonal() {
    let n = 128;
    let l = 1.0;
    let fam = build_family(n, 1.0, l, 10.0, ModelClass::M3, 9).unwrap();
    let spec = ModelSpec::sufficient(Model::M3, n, 0.1).unwrap();
    let s0 = cov_differenced(&spec, &VolatilityProfile::constant(1.0).unwrap()).unwrap();
    let cap = 4.0 * l * fam.h.powf(fam.alpha) * fam.kernel.sup_norm() / (3.0 * (n as f64).powi(3));
    for k in 0..fam.len() {
        let sk = cov_differenced(&spec, &fam.profile(k).unwrap()).unwrap();
        let gap = sk.sub(&s0).unwrap();
        assert!(is_psd(&gap, 1e-9), "ordering fails for {k}");
        let room = SymMatrix::from_diagonal(&vec![cap; n]).sub(&gap).unwrap();
        assert!(is_psd(&room, 1e-9), "domination fails for {k}");
    }
}

#[test]
fn model_three_ordering_for_pointwise_larger_profiles() {
    let mut r = rng(21);
    let spec = ModelSpec::sufficient(Model::M3, 48, 0.05).unwrap();
    let base = VolatilityProfile::constant(1.0).unwrap();
    let s0 = cov_differenced(&spec, &base).unwrap();
    for _ in 0..10 {
        let p = random_profile(&mut r);
        let sk = cov_differenced(&spec, &p).unwrap();
        assert!(is_psd(&sk.sub(&s0).unwrap(), 1e-9));
    }
}

#[test]
fn model_three_structure() {
    let rep = model3_structure_report(64, 0.1).unwrap();
    assert!(rep.interior_diag_rel_err < 1e-12);
    assert!(rep.offdiag_rel_err < 1e-12);
    assert!(rep.entry_12_rel_err < 1e-12);
    assert!(rep.beyond_band_max == 0.0);
    assert!(rep.v2_12_err < 1e-10);
    assert!((rep.entry_11_quadrature - 4.0 / 6.0).abs() < 1e-12);
}

#[test]
fn export_round_trips_through_csv() {
    let spec = ModelSpec::sufficient(Model::M1, 4, 0.1).unwrap();
    let c = cov_differenced(&spec, &wave()).unwrap();
    let mut buf = Vec::new();
    write_matrix_csv(&c, &mut buf).unwrap();
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(&buf[..]);
    for (i, rec) in rdr.records().enumerate() {
        for (j, v) in rec.unwrap().iter().enumerate() {
            assert_eq!(v.parse::<f64>().unwrap(), c.get(i, j));
        }
    }
    let h = export_header(&spec, &wave());
    assert_eq!(h["differencing"], "first");
}

#[test]
fn inverse_frobenius_growth_is_bounded() {
    for model in [Model::M1, Model::M3] {
        let rows = inverse_frobenius_sweep(model, 0.1, &[64, 128, 256, 512]).unwrap();
        let lo = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
        assert!(hi / lo < 3.0, "{model:?}: {lo} .. {hi}");
    }
}

#[test]
fn model_one_null_eigenvalues_exceed_step() {
    for n in [8, 64, 200] {
        let s0 = cov_differenced(
            &ModelSpec::sufficient(Model::M1, n, 0.3).unwrap(),
            &VolatilityProfile::constant(1.0).unwrap(),
        )
        .unwrap();
        let min = *mnlab_core::linalg::sym_eigenvalues(&s0).unwrap().last().unwrap();
        assert!(min >= 1.0 / n as f64 - 1e-12);
    }
}
