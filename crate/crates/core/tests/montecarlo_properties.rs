mod common;

use common::*;
use mnlab_core::covariance::Model;
use mnlab_core::linalg::SymMatrix;
use mnlab_core::montecarlo::*;
use mnlab_core::profile::{Bump, VolatilityProfile};
use mnlab_core::hypothesis::BumpKernel;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

fn empirical_cov(x: &mnlab_core::linalg::Matrix) -> Vec<Vec<f64>> {
    let (reps, n) = (x.rows(), x.cols());
    let mut c = vec![vec![0.0; n]; n];
    for r in 0..reps {
        let row = x.row(r);
        for i in 0..n {
            for j in 0..n {
                c[i][j] += row[i] * row[j];
            }
        }
    }
    c.iter_mut().flatten().for_each(|v| *v /= reps as f64);
    c
}

fn check_cov(sigma: &SymMatrix, reps: usize, seed: u64) {
    let x = sample_gaussian(sigma, reps, seed).unwrap();
    let c = empirical_cov(&x);
    let n = sigma.n();
    let sigma = sigma.as_matrix();
    for i in 0..n {
        for j in 0..n {
            let se = ((sigma[(i, j)].powi(2) + sigma[(i, i)] * sigma[(j, j)]) / reps as f64).sqrt();
            assert!((c[i][j] - sigma[(i, j)]).abs() < 5.0 * se, "({i},{j}) {} vs {}", c[i][j], sigma[(i, j)]);
        }
    }
}

#[test]
fn sampler_reproduces_covariance() {
    check_cov(&SymMatrix::identity(2), 100_000, 1);
    let mut r = rng(8);
    check_cov(&random_spd(&mut r, 4, 0.5), 100_000, 2);
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let sigma = random_spd(&mut rng(3), 6, 0.1);
    let a = in_pool(1, || sample_gaussian(&sigma, 257, 77).unwrap());
    let b = in_pool(3, || sample_gaussian(&sigma, 257, 77).unwrap());
    assert_eq!(a.max_abs_diff(&b), 0.0);
    let cfg = RateConfig {
        model: Model::M1,
        estimator: Estimator::Mle,
        ns: vec![64, 128],
        reps: 50,
        seed: 9,
        tau: 0.1,
        sigma_sq: 1.0,
    };
    let x = in_pool(1, || rate_experiment(&cfg).unwrap());
    let y = in_pool(3, || rate_experiment(&cfg).unwrap());
    assert_eq!(serde_json::to_string(&x).unwrap(), serde_json::to_string(&y).unwrap());
}

#[test]
fn differenced_noise_has_negative_lag_one_covariance() {
    let (n, tau, reps) = (32, 0.5, 40_000);
    let v = vec![1.0 / n as f64; n];
    let (mut lag1, mut lag2, mut count) = (0.0, 0.0, 0usize);
    for r in 0..reps {
        let d = simulate_m1_diff(&v, tau, &mut replicate_rng(4, r));
        for i in 1..n - 2 {
            lag1 += d[i] * d[i + 1];
            lag2 += d[i] * d[i + 2];
            count += 1;
        }
    }
    let (lag1, lag2) = (lag1 / count as f64, lag2 / count as f64);
    assert!((lag1 + tau * tau).abs() < 0.01, "lag 1 {lag1}");
    assert!(lag2.abs() < 0.01, "lag 2 {lag2}");
}

#[test]
fn linear_functional_is_gaussian() {
    let (n, tau, draws) = (16, 0.3, 10_000);
    let mut r = rng(21);
    let w: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..n).map(|_| r.gen_range(0.01..0.1)).collect();
    let mut var: f64 = w.iter().zip(&v).map(|(a, b)| a * a * b).sum();
    for i in 0..n {
        let next = if i + 1 < n { w[i + 1] } else { 0.0 };
        var += tau * tau * (w[i] - next).powi(2);
    }
    let normal = Normal::new(0.0, var.sqrt()).unwrap();
    let mut s: Vec<f64> = (0..draws)
        .map(|k| {
            let d = simulate_m1_diff(&v, tau, &mut replicate_rng(5, k));
            w.iter().zip(&d).map(|(a, b)| a * b).sum()
        })
        .collect();
    s.sort_by(f64::total_cmp);
    let ks = s
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = normal.cdf(*x);
            (f - i as f64 / draws as f64).max((i + 1) as f64 / draws as f64 - f)
        })
        .fold(0.0, f64::max);
    assert!(ks < 1.628 / (draws as f64).sqrt(), "KS {ks}");
}

#[test]
fn likelihood_estimator_is_unbiased() {
    let cfg = RateConfig {
        model: Model::M1,
        estimator: Estimator::Mle,
        ns: vec![2048, 4096],
        reps: 500,
        seed: 31,
        tau: 0.1,
        sigma_sq: 1.0,
    };
    let res = rate_experiment(&cfg).unwrap();
    let row = &res.rows[1];
    assert!((row.mean - 1.0).abs() < 4.0 * row.mean_se, "{} ± {}", row.mean, row.mean_se);
}

#[test]
fn standard_errors_shrink_with_replicates() {
    let run = |reps| {
        rate_experiment(&RateConfig {
            model: Model::M1,
            estimator: Estimator::Mle,
            ns: vec![256, 512],
            reps,
            seed: 12,
            tau: 0.1,
            sigma_sq: 1.0,
        })
        .unwrap()
    };
    let (a, b) = (run(400), run(1600));
    for (x, y) in a.rows.iter().zip(&b.rows) {
        let ratio = x.mse_se / y.mse_se;
        assert!((1.5..2.7).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn binned_estimates_are_homogeneous_for_constant_truth() {
    let (n, tau, bins, reps) = (4096, 0.1, 8, 200);
    let v = vec![2.0 / n as f64; n];
    let mut sums = vec![0.0; bins];
    for r in 0..reps {
        let d = simulate_m1_diff(&v, tau, &mut replicate_rng(13, r));
        let est = binned_estimator(&d, n, tau, bins).unwrap();
        for (s, x) in sums.iter_mut().zip(&est.values) {
            *s += x;
        }
    }
    for s in sums {
        assert!((s / reps as f64 - 2.0).abs() < 0.1, "{}", s / reps as f64);
    }
}

#[test]
fn binned_risk_is_u_shaped_in_bin_count() {
    let (n, tau, reps) = (4096, 0.1, 40);
    let kernel = BumpKernel::with_constant(1.0, 1.0).unwrap();
    let truth = VolatilityProfile::bump_family(
        1.0,
        kernel,
        vec![Bump { center: 0.5, width: 0.4, height: 20.0 }],
    )
    .unwrap();
    let v = increment_variances(&truth, n).unwrap();
    let bins = [1usize, 4, 16, 64, 256];
    let mut ise = vec![0.0; bins.len()];
    for r in 0..reps {
        let d = simulate_m1_diff(&v, tau, &mut replicate_rng(17, r));
        for (k, &b) in bins.iter().enumerate() {
            ise[k] += binned_estimator(&d, n, tau, b).unwrap().ise(&truth).unwrap() / reps as f64;
        }
    }
    let best = (0..bins.len()).min_by(|&a, &b| ise[a].total_cmp(&ise[b])).unwrap();
    assert!(best > 0 && best < bins.len() - 1, "{ise:?}");
}

#[test]
fn outputs_round_trip() {
    let res = rate_experiment(&RateConfig {
        model: Model::M1,
        estimator: Estimator::RvDebiased,
        ns: vec![64, 128, 256],
        reps: 20,
        seed: 1,
        tau: 0.1,
        sigma_sq: 1.0,
    })
    .unwrap();
    let mut buf = Vec::new();
    res.write_csv(&mut buf).unwrap();
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    let head: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(head, ["model", "estimator", "n", "mse", "mse_se", "var", "var_se", "reps", "seed"]);
    let recs: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(recs.len(), 3);
    assert_eq!(&recs[2][1], "rv_debiased");
    assert_eq!(recs[1][3].parse::<f64>().unwrap(), res.rows[1].mse);
    let json: serde_json::Value = serde_json::to_value(&res).unwrap();
    assert_eq!(json["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn configurations_are_validated() {
    let mut cfg = RateConfig {
        model: Model::M3,
        estimator: Estimator::Mle,
        ns: vec![64, 128],
        reps: 10,
        seed: 0,
        tau: 0.1,
        sigma_sq: 1.0,
    };
    assert!(cfg.validate().is_err());
    cfg.model = Model::M1;
    cfg.ns = vec![128, 64];
    assert!(cfg.validate().is_err());
    cfg.ns = vec![64, 128];
    cfg.reps = 1;
    assert!(cfg.validate().is_err());
}
