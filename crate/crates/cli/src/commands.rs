//! One function per subcommand. Each returns the report, the table for
//! CSV output, and the list of violated invariants.

use mnlab_core::certificate::{
    critical_c, evaluate, kl_scaling_probe, rate_table, two_point_certificate_m3, Certificate,
    CertificateParams,
};
use mnlab_core::covariance::{inverse_frobenius_sweep, model3_structure_report, Model};
use mnlab_core::kl::bound_validity_sweep;
use mnlab_core::linalg::self_check;
use mnlab_core::montecarlo::{rate_experiment, Estimator, RateConfig};
use mnlab_core::spectral::{posdefmaj_sweep, verify_spectrum, VerificationReport};
use serde_json::{json, to_value, Value};

use crate::config::{CommandName, RunConfig};
use crate::output::{Outcome, Table};
use crate::RunError;

/// Largest spread `max/min` of the normalised inverse Frobenius norms.
pub const FROBENIUS_SPREAD_LIMIT: f64 = 3.0;
/// Allowed gap between fitted and predicted log-log slopes.
pub const SLOPE_TOLERANCE: f64 = 0.1;
/// Relative window around `8τσ³` for the scaled estimator variance.
pub const VARIANCE_WINDOW: f64 = 0.25;
/// Target MSE slope of the likelihood estimator.
pub const MLE_SLOPE: f64 = -0.5;

fn num(x: f64) -> String {
    format!("{x}")
}

fn verdict(checks: Vec<(bool, String)>) -> (bool, Vec<String>) {
    let failures: Vec<String> = checks.into_iter().filter(|c| !c.0).map(|c| c.1).collect();
    (failures.is_empty(), failures)
}

fn outcome(checks: Vec<(bool, String)>, report: Value, table: Option<Table>) -> Outcome {
    let (pass, failures) = verdict(checks);
    Outcome {
        pass,
        failures,
        report,
        table,
    }
}

pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, RunError> {
    match cfg.command {
        CommandName::VerifyLinalg => verify_linalg(cfg),
        CommandName::VerifySpectral => verify_spectral(cfg),
        CommandName::VerifyKl => verify_kl(cfg),
        CommandName::VerifyPosdefmaj => verify_posdefmaj(cfg),
        CommandName::VerifyModel3Structure => verify_model3(cfg),
        CommandName::Certificate => certificate(cfg),
        CommandName::TwoPointM3 => two_point(cfg),
        CommandName::RateTable => rates(cfg),
        CommandName::KlScaling => kl_scaling(cfg),
        CommandName::SimulateRate => simulate_rate(cfg),
    }
}

fn verify_linalg(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let (n, seed, tol) = (cfg.n.unwrap(), cfg.seed.unwrap(), cfg.tol.unwrap());
    let c = self_check(n, seed, tol)?;
    let report = VerificationReport {
        statement: "LL^T = M; V diag(w) V^T = M with V^T V = I; Jacobi and QL spectra agree; \
                    lambda_min >= -tol ||M||_F decides PSD"
            .into(),
        n,
        parameters: to_value(&c).expect("serialisable"),
        max_abs_residual: c
            .cholesky_residual
            .max(c.eigen_residual)
            .max(c.orthogonality_residual)
            .max(c.solver_agreement),
        pass: c.pass,
    };
    let checks = vec![
        (c.cholesky_residual <= tol, format!("LL^T = M: relative residual {:e} > {tol:e}", c.cholesky_residual)),
        (c.eigen_residual <= tol, format!("V diag(w) V^T = M: relative residual {:e} > {tol:e}", c.eigen_residual)),
        (c.orthogonality_residual <= tol, format!("V^T V = I: residual {:e} > {tol:e}", c.orthogonality_residual)),
        (c.solver_agreement <= tol, format!("Jacobi and QL eigenvalues differ by {:e} > {tol:e}", c.solver_agreement)),
        (c.psd_classification, "is_psd misclassifies a Gram matrix or its -I shift".into()),
    ];
    Ok(outcome(checks, to_value(report).expect("serialisable"), None))
}

fn verify_spectral(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let (n, tol) = (cfg.n.unwrap(), cfg.tol.unwrap());
    let r = verify_spectrum(n, tol)?;
    let bound_ok = r.parameters["lower_bound_holds"].as_bool().unwrap_or(false);
    let factor = r.parameters["qinv_equals_o_ot_residual"].as_f64().unwrap_or(f64::INFINITY);
    let checks = vec![
        (
            r.max_abs_residual <= tol,
            format!(
                "eigenvalues of A and Q^-1 equal 4 sin^2((2i-1)pi/(4n+2)): max deviation {:e} > {tol:e}",
                r.max_abs_residual
            ),
        ),
        (bound_ok, "lambda_i >= i^2/(4n^2) fails at some index".into()),
        (factor == 0.0, format!("Q^-1 = O O^T: residual {factor:e}")),
    ];
    Ok(outcome(checks, to_value(r).expect("serialisable"), None))
}

fn verify_kl(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let (max_n, trials, seed) = (cfg.n.unwrap(), cfg.reps.unwrap(), cfg.seed.unwrap());
    let s = bound_validity_sweep(trials, max_n, seed)?;
    let report = VerificationReport {
        statement: "KL(N(0,S1) || N(0,S0)) <= ||S0^-1/2 (S1-S0) S0^-1/2||_F^2/(4C^2) \
                    <= ||S0^-1 S1 - I||_F^2/(4C^2) whenever C S0 <= S1"
            .into(),
        n: max_n,
        parameters: to_value(&s).expect("serialisable"),
        max_abs_residual: (s.bound_violations + s.middle_violations) as f64,
        pass: s.pass,
    };
    let checks = vec![
        (
            s.bound_violations == 0,
            format!(
                "KL <= ||S0^-1 S1 - I||_F^2/(4C^2) violated in {} of {trials} trials",
                s.bound_violations
            ),
        ),
        (
            s.middle_violations == 0,
            format!(
                "||S0^-1/2 D S0^-1/2||_F <= ||S0^-1 D||_F violated in {} of {trials} trials",
                s.middle_violations
            ),
        ),
    ];
    Ok(outcome(checks, to_value(report).expect("serialisable"), None))
}

fn verify_posdefmaj(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let (ns, profiles, seed) = (cfg.ns.clone().unwrap(), cfg.reps.unwrap(), cfg.seed.unwrap());
    let s = posdefmaj_sweep(profiles, &ns, seed)?;
    let report = VerificationReport {
        statement: "(2+12L^2)^-1 Q <= Sigma Q Sigma for Lipschitz sigma >= 1".into(),
        n: ns.iter().copied().max().unwrap_or(0),
        parameters: to_value(&s).expect("serialisable"),
        max_abs_residual: (-s.worst_relative_margin).max(0.0),
        pass: s.pass,
    };
    let checks = vec![(
        s.pass,
        format!(
            "lambda_min(Sigma Q Sigma - (2+12L^2)^-1 Q) >= -1e-9 ||Q||_F fails in {} of {} cases",
            s.failures, s.evaluations
        ),
    )];
    Ok(outcome(checks, to_value(report).expect("serialisable"), None))
}

fn verify_model3(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let n = cfg.n.unwrap();
    let tol = cfg.tol.unwrap();
    let r = model3_structure_report(n, cfg.tau.unwrap())?;
    let cert = evaluate(&CertificateParams {
        model: Model::M3,
        n,
        alpha: cfg.alpha.unwrap(),
        l_const: cfg.l.unwrap(),
        tau: cfg.tau.unwrap(),
        c: cfg.c.unwrap(),
        kappa: cfg.kappa.unwrap(),
        max_hypotheses: cfg.max_hypotheses.unwrap(),
        seed: cfg.seed.unwrap(),
    })?;
    let dominated = cert.frobenius_bound.all_certified;
    let checks = vec![
        (
            r.interior_diag_rel_err <= tol,
            format!("interior diagonal = 2/(3n^3): relative error {:e} > {tol:e}", r.interior_diag_rel_err),
        ),
        (
            r.offdiag_rel_err <= tol,
            format!("adjacent off-diagonal = 1/(6n^3): relative error {:e} > {tol:e}", r.offdiag_rel_err),
        ),
        (
            r.v2_12_err <= 1e-10,
            format!("(V2)_12 = 3 - 2 sqrt 2: error {:e} > 1e-10", r.v2_12_err),
        ),
        (
            r.v2_confined,
            format!(
                "V2 confined to the leading 3x3 block: {} entries outside, first {:?}",
                r.v2_outside_block.len(),
                r.v2_outside_block.first()
            ),
        ),
        (
            dominated,
            format!(
                "Sigma_k - Sigma_0 >= 0 fails for a hypothesis among {}",
                cert.hypotheses_evaluated
            ),
        ),
    ];
    let report = json!({
        "structure": r,
        "entry_11_discrepancy": {
            "quadrature_times_n3": r.entry_11_quadrature,
            "structured_display_times_n3": r.entry_11_structured,
            "difference": r.entry_11_quadrature - r.entry_11_structured,
        },
        "alternatives_dominate_null": dominated,
        "hypotheses_evaluated": cert.hypotheses_evaluated,
        "family": cert.family,
    });
    Ok(outcome(checks, report, None))
}

fn certificate_checks(cert: &Certificate) -> Vec<(bool, String)> {
    vec![
        (
            cert.cond_i,
            "every hypothesis lies in the Hoelder class with 1 <= sigma^2 <= u".into(),
        ),
        (
            cert.cond_ii.pass,
            format!(
                "min ||sigma_j^2 - sigma_k^2||_2 = {:e} >= threshold {:e}",
                cert.cond_ii.min_separation, cert.cond_ii.threshold
            ),
        ),
        (
            cert.cond_iii.pass,
            format!(
                "average KL {:e} <= kappa log M = {:e}",
                cert.cond_iii.avg_kl, cert.cond_iii.kappa_bound
            ),
        ),
        (
            cert.frobenius_bound.consistent,
            "KL <= ||S0^-1 Sk - I||_F^2/(4C^2) for every Loewner-certified hypothesis".into(),
        ),
    ]
}

fn hypothesis_table(cert: &Certificate) -> Table {
    let mut t = Table::new(&[
        "index", "codeword", "kl_exact", "loewner_certified", "bound_value", "bound_holds",
    ]);
    for h in &cert.hypotheses {
        t.push(vec![
            h.index.to_string(),
            h.codeword.clone(),
            num(h.kl_exact),
            h.loewner_certified.to_string(),
            num(h.bound_value),
            h.bound_holds.to_string(),
        ]);
    }
    t
}

fn certificate(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mut params = CertificateParams {
        model: cfg.core_model().unwrap(),
        n: cfg.n.unwrap(),
        alpha: cfg.alpha.unwrap(),
        l_const: cfg.l.unwrap(),
        tau: cfg.tau.unwrap(),
        c: cfg.c.unwrap(),
        kappa: cfg.kappa.unwrap(),
        max_hypotheses: cfg.max_hypotheses.unwrap(),
        seed: cfg.seed.unwrap(),
    };
    let search = if cfg.search_c == Some(true) {
        let found = critical_c(&params, cfg.m_max.unwrap())?;
        match found.c_star {
            Some(c) => params.c = c * (1.0 + 1e-9),
            None => {
                let report = json!({ "critical_c": found });
                let checks = vec![(
                    false,
                    format!("no c up to m = {} gives average KL <= kappa log M", cfg.m_max.unwrap()),
                )];
                return Ok(outcome(checks, report, None));
            }
        }
        Some(found)
    } else {
        None
    };
    let cert = evaluate(&params)?;
    let checks = certificate_checks(&cert);
    let table = hypothesis_table(&cert);
    let mut report = to_value(&cert).expect("serialisable");
    if let Some(found) = search {
        report["critical_c"] = to_value(found).expect("serialisable");
    }
    Ok(outcome(checks, report, Some(table)))
}

fn two_point(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let cert = two_point_certificate_m3(
        cfg.n.unwrap(),
        cfg.sigma_min.unwrap(),
        cfg.sigma_max.unwrap(),
        cfg.c.unwrap(),
        cfg.tau.unwrap(),
        cfg.kappa.unwrap(),
    )?;
    let checks = certificate_checks(&cert);
    let table = hypothesis_table(&cert);
    Ok(outcome(checks, to_value(&cert).expect("serialisable"), Some(table)))
}

fn rates(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let rows = rate_table(cfg.alphas.as_deref().unwrap(), cfg.qs.as_deref().unwrap());
    let mut t = Table::new(&["model", "q", "alpha", "exponent"]);
    for r in &rows {
        t.push(vec![
            r.model.clone(),
            r.q.map(num).unwrap_or_default(),
            num(r.alpha),
            num(r.exponent),
        ]);
    }
    let mut checks = Vec::new();
    for r in rows.iter().filter(|r| r.q == Some(0.0) || r.q == Some(1.0)) {
        let base = if r.q == Some(0.0) { "m1" } else { "m3" };
        let e = rows
            .iter()
            .find(|x| x.model == base && x.alpha == r.alpha)
            .map(|x| x.exponent);
        checks.push((
            e == Some(r.exponent),
            format!("kernel exponent q = {:?} reproduces the {base} rate at alpha = {}", r.q, r.alpha),
        ));
    }
    Ok(outcome(checks, json!({ "rows": rows }), Some(t)))
}

fn kl_scaling(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let model = cfg.core_model().unwrap();
    let ns = cfg.ns.clone().unwrap();
    let table = kl_scaling_probe(model, cfg.alpha.unwrap(), cfg.l.unwrap(), cfg.tau.unwrap(), &ns)?;
    let frob = inverse_frobenius_sweep(model, cfg.tau.unwrap(), &ns)?;
    let ratios: Vec<f64> = frob.iter().map(|r| r.ratio).collect();
    let spread = ratios.iter().cloned().fold(0.0, f64::max)
        / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut t = Table::new(&[
        "n", "kl_exact", "prediction", "ratio", "inverse_frobenius_sq", "frobenius_ratio",
    ]);
    for (r, f) in table.rows.iter().zip(&frob) {
        t.push(vec![
            r.n.to_string(),
            num(r.kl_exact),
            num(r.prediction),
            num(r.ratio),
            num(f.inverse_frobenius_sq),
            num(f.ratio),
        ]);
    }
    let gap = (table.fit.slope - table.predicted_slope).abs();
    let checks = vec![
        (
            gap <= SLOPE_TOLERANCE,
            format!(
                "log-log slope of KL in n = {:.4}, predicted {} +- {SLOPE_TOLERANCE}",
                table.fit.slope, table.predicted_slope
            ),
        ),
        (
            spread < FROBENIUS_SPREAD_LIMIT,
            format!("||Sigma_0^-1||_F^2 / n^e varies by a factor {spread:.3} >= {FROBENIUS_SPREAD_LIMIT}"),
        ),
    ];
    let report = json!({
        "scaling": table,
        "inverse_frobenius": frob,
        "frobenius_spread": spread,
    });
    Ok(outcome(checks, report, Some(t)))
}

fn simulate_rate(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let rc = RateConfig {
        model: cfg.core_model().unwrap(),
        estimator: cfg.estimator.unwrap(),
        ns: cfg.ns.clone().unwrap(),
        reps: cfg.reps.unwrap(),
        seed: cfg.seed.unwrap(),
        tau: cfg.tau.unwrap(),
        sigma_sq: cfg.sigma_sq.unwrap(),
    };
    let res = rate_experiment(&rc)?;
    let mut checks = Vec::new();
    if rc.estimator == Estimator::Mle {
        let last = res.rows.last().expect("at least two sizes");
        let target = res.efficient_variance;
        checks.push((
            (res.fit.slope - MLE_SLOPE).abs() <= SLOPE_TOLERANCE,
            format!(
                "MSE slope {:.4} +- {:.4} within {SLOPE_TOLERANCE} of {MLE_SLOPE}",
                res.fit.slope, res.fit.slope_se
            ),
        ));
        checks.push((
            (last.scaled_var - target).abs() <= VARIANCE_WINDOW * target,
            format!(
                "Var(n^1/4 (est - sigma^2)) = {:.4} at n = {} within 25% of 8 tau sigma^3 = {target:.4}",
                last.scaled_var, last.n
            ),
        ));
    }
    let mut buf = Vec::new();
    res.write_csv(&mut buf)?;
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    let header: Vec<&str> = vec![
        "model", "estimator", "n", "mse", "mse_se", "var", "var_se", "reps", "seed",
    ];
    let mut t = Table::new(&header);
    for rec in rd.records() {
        let rec = rec.map_err(|e| RunError::Config(mnlab_core::Error::from(e)))?;
        t.push(rec.iter().map(String::from).collect());
    }
    Ok(outcome(checks, to_value(&res).expect("serialisable"), Some(t)))
}
