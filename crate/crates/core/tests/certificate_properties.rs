use mnlab_core::certificate::*;
use mnlab_core::covariance::{cov_differenced, Model, ModelSpec};
use mnlab_core::hypothesis::{build_family, ModelClass};
use mnlab_core::linalg::{is_psd, DEFAULT_PSD_TOL};
use mnlab_core::Error;
use proptest::prelude::*;

fn params(model: Model, n: usize, c: f64) -> CertificateParams {
    CertificateParams {
        model,
        n,
        alpha: 1.0,
        l_const: 1.0,
        tau: 0.1,
        c,
        kappa: 0.09,
        max_hypotheses: DEFAULT_MAX_HYPOTHESES,
        seed: 7,
    }
}

#[test]
fn certificates_are_deterministic() {
    let p = params(Model::M1, 512, 5.0);
    let a = serde_json::to_string(&evaluate(&p).unwrap()).unwrap();
    let b = serde_json::to_string(&evaluate(&p).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn overall_pass_is_conjunction() {
    for (model, c) in [(Model::M1, 5.0), (Model::M2, 5.0), (Model::M3, 10.0)] {
        let cert = evaluate(&params(model, 1024, c)).unwrap();
        assert_eq!(cert.overall_pass, cert.cond_i && cert.cond_ii.pass && cert.cond_iii.pass);
        assert!(cert.cond_ii.closed_form_max_rel_err <= SEPARATION_REL_TOL);
        assert_eq!(cert.cond_iii.kappa_bound, 0.09 * cert.cond_iii.log2_m * std::f64::consts::LN_2);
        assert!(cert.overall_pass, "{model:?}");
    }
}

#[test]
fn frobenius_bound_is_consistent_with_exact_divergence() {
    for (model, c) in [(Model::M1, 5.0), (Model::M2, 5.0), (Model::M3, 12.0)] {
        let cert = evaluate(&params(model, 512, c)).unwrap();
        assert_eq!(cert.frobenius_bound.loewner_constant_c, frobenius_bound_constant(model, 1.0));
        assert!(cert.frobenius_bound.consistent);
        for h in &cert.hypotheses {
            if h.loewner_certified {
                assert!(h.bound_holds && h.kl_exact <= h.bound_value + 1e-9);
            }
        }
    }
    let m2 = evaluate(&params(Model::M2, 256, 6.0)).unwrap();
    assert!(m2.frobenius_bound.all_certified);
    assert!((m2.frobenius_bound.loewner_constant_c - 1.0 / 14.0).abs() < 1e-15);
}

#[test]
fn model_three_alternatives_dominate_null() {
    let (n, tau) = (256, 0.1);
    let f = build_family(n, 1.0, 1.0, 12.0, ModelClass::M3, 3).unwrap();
    let spec = ModelSpec::sufficient(Model::M3, n, tau).unwrap();
    let s0 = cov_differenced(&spec, &f.profile(0).unwrap()).unwrap();
    for k in 1..f.len() {
        let sk = cov_differenced(&spec, &f.profile(k).unwrap()).unwrap();
        assert!(is_psd(&sk, DEFAULT_PSD_TOL));
        assert!(is_psd(&sk.sub(&s0).unwrap(), DEFAULT_PSD_TOL));
    }
}

#[test]
fn divergence_falls_as_noise_grows() {
    let mut last = f64::INFINITY;
    for tau in [0.02, 0.05, 0.1, 0.2, 0.5] {
        let cert = evaluate(&CertificateParams { tau, ..params(Model::M1, 512, 5.0) }).unwrap();
        assert!(cert.cond_iii.avg_kl < last, "tau {tau}");
        last = cert.cond_iii.avg_kl;
    }
}

#[test]
fn sampling_is_labelled() {
    let small = evaluate(&params(Model::M1, 1024, 5.0)).unwrap();
    assert_eq!(small.cond_iii.averaging, Averaging::Exhaustive);
    let wide = CertificateParams { max_hypotheses: 2, ..params(Model::M1, 4096, 30.0) };
    let cert = evaluate(&wide).unwrap();
    assert_eq!(cert.cond_iii.averaging, Averaging::Sampled);
    assert_eq!(cert.hypotheses_evaluated, 2);
}

#[test]
fn critical_c_is_smallest_passing_value() {
    let p = CertificateParams { kappa: 0.01, tau: 0.02, ..params(Model::M2, 1024, 5.0) };
    let res = critical_c(&p, 64).unwrap();
    let m = res.m_star.expect("some family passes");
    let c = res.c_star.unwrap();
    let at = |c: f64| evaluate(&CertificateParams { c, ..p.clone() }).unwrap();
    assert!(at(c * (1.0 + 1e-9)).cond_iii.pass);
    assert_eq!(at(c * (1.0 + 1e-9)).family["m"], m);
    if m > 8 {
        assert!(!at(c * (1.0 - 1e-6)).cond_iii.pass);
    }
}

#[test]
fn two_point_certificate_behaviour() {
    let zero = two_point_certificate_m3(256, 1.0, 4.0, 0.0, 0.1, 0.09).unwrap();
    assert_eq!(zero.cond_iii.avg_kl, 0.0);
    let mut last = 0.0;
    for c in [0.05, 0.1, 0.2, 0.4, 0.8] {
        let cert = two_point_certificate_m3(256, 1.0, 4.0, c, 0.1, 0.09).unwrap();
        assert!(cert.cond_iii.avg_kl > last);
        assert!(cert.frobenius_bound.all_certified && cert.frobenius_bound.consistent);
        last = cert.cond_iii.avg_kl;
    }
    let small = two_point_certificate_m3(256, 1.0, 4.0, 0.05, 0.1, 0.09).unwrap();
    assert!(small.cond_iii.avg_kl < 0.09 * std::f64::consts::LN_2);
    assert!(small.overall_pass);
    assert!(two_point_certificate_m3(256, 1.0, 1.1, 5.0, 0.1, 0.09).is_err());
}

#[test]
fn invalid_requests_are_rejected() {
    assert!(matches!(evaluate(&params(Model::Mq(0.5), 256, 5.0)), Err(Error::Unsupported(_))));
    assert!(matches!(evaluate(&params(Model::M1, 8192, 5.0)), Err(Error::InvalidSpec(_))));
    assert!(matches!(
        evaluate(&CertificateParams { kappa: -0.1, ..params(Model::M1, 256, 5.0) }),
        Err(Error::InvalidSpec(_))
    ));
    assert!(matches!(evaluate(&params(Model::M1, 256, 0.5)), Err(Error::TooFewBumps { .. })));
}

#[test]
fn kl_scaling_tracks_prediction() {
    let ns = [256, 512, 1024, 2048];
    for model in [Model::M1, Model::M3] {
        let t = kl_scaling_probe(model, 1.0, 1.0, 0.1, &ns).unwrap();
        assert!((t.fit.slope - t.predicted_slope).abs() < 0.1, "{model:?} slope {}", t.fit.slope);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rate_exponents_interpolate_through_q(alpha in 0.05f64..5.0) {
        let rows = rate_table(&[alpha], &[0.0, 1.0]);
        let get = |m: &str, q: Option<f64>| rows.iter().find(|r| r.model == m && r.q == q).unwrap().exponent;
        prop_assert!((get("mq", Some(0.0)) - get("m1", None)).abs() < 1e-15);
        prop_assert!((get("mq", Some(1.0)) - get("m3", None)).abs() < 1e-15);
        prop_assert_eq!(get("m1", None), get("m2", None));
        prop_assert!(get("m3", None) > get("m1", None));
        prop_assert!(get("m1", None) > -0.25);
    }
}
