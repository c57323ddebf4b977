//! Finite-n checks of the three premises of the multiple-testing lower
//! bound: class membership, pairwise separation, and small average
//! divergence from the null.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::covariance::{cov_differenced, Model, ModelSpec};
use crate::error::{Error, Result};
use crate::hypothesis::{
    bitstring, build_family, holder_report, l2_separation, BumpKernel, HypothesisFamily,
    ModelClass, MIN_BUMPS, SEMINORM_GRID,
};
use crate::kl::{KlReference, BOUND_SLACK};
use crate::linalg::{is_psd, DEFAULT_PSD_TOL};
use crate::profile::{Bump, VolatilityProfile};
use crate::stats::{log_log_fit, LineFit};

/// Largest `n` for which exact divergences are attempted.
pub const MAX_EXACT_N: usize = 4096;
pub const DEFAULT_MAX_HYPOTHESES: usize = 16;
/// `κ` must stay strictly below this.
pub const KAPPA_LIMIT: f64 = 0.1;
/// Relative agreement required between quadrature and closed-form
/// separations.
pub const SEPARATION_REL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateParams {
    pub model: Model,
    pub n: usize,
    pub alpha: f64,
    #[serde(rename = "l")]
    pub l_const: f64,
    pub tau: f64,
    pub c: f64,
    pub kappa: f64,
    pub max_hypotheses: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationCheck {
    /// Smallest `‖σ²_i − σ²_j‖₂` over evaluated pairs, by quadrature.
    pub min_separation: f64,
    /// `L hᵅ ‖K‖₂ / 16`.
    pub threshold: f64,
    /// `c·n^{−rate}`, informational.
    pub nominal_threshold: f64,
    /// Worst relative gap between quadrature and `L²h^{2α+1}‖K‖₂²ρ`.
    pub closed_form_max_rel_err: f64,
    pub pairs: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivergenceCheck {
    /// Mean exact divergence in nats.
    pub avg_kl: f64,
    pub max_kl: f64,
    /// `log₂ M` with `M` the number of alternatives.
    pub log2_m: f64,
    /// `κ · log₂M · ln 2`.
    pub kappa_bound: f64,
    pub averaging: Averaging,
    pub pass: bool,
}

/// Per-alternative results.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisEval {
    pub index: usize,
    pub codeword: String,
    pub kl_exact: f64,
    /// `Σ_k − CΣ₀ ≥ 0` numerically.
    pub loewner_certified: bool,
    /// `‖Σ₀⁻¹Σ_k − I‖_F² / (4C²)`.
    pub bound_value: f64,
    pub bound_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundSummary {
    pub loewner_constant_c: f64,
    pub all_certified: bool,
    pub avg_bound: f64,
    /// Every certified alternative has `KL ≤ bound`.
    pub consistent: bool,
    /// The averaged bound alone establishes the divergence condition.
    pub certifies_cond_iii: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub model: String,
    pub n: usize,
    pub alpha: f64,
    #[serde(rename = "l")]
    pub l_const: f64,
    pub tau: f64,
    pub c: f64,
    pub kappa: f64,
    pub family: Value,
    pub cond_i: bool,
    pub cond_ii: SeparationCheck,
    pub cond_iii: DivergenceCheck,
    pub frobenius_bound: BoundSummary,
    pub hypotheses: Vec<HypothesisEval>,
    pub hypotheses_evaluated: usize,
    pub overall_pass: bool,
}

fn model_class(model: Model) -> Result<ModelClass> {
    match model {
        Model::M1 | Model::M2 => Ok(ModelClass::M1M2),
        Model::M3 => Ok(ModelClass::M3),
        Model::Mq(_) => Err(Error::Unsupported(
            "certificates are defined for models m1, m2 and m3".into(),
        )),
    }
}

/// Loewner constant used with the Frobenius bound: `(2 + 12L²)⁻¹` for the
/// diagonal-multiplier model, 1 where alternatives dominate the null.
pub fn frobenius_bound_constant(model: Model, l_const: f64) -> f64 {
    match model {
        Model::M2 => 1.0 / (2.0 + 12.0 * l_const * l_const),
        _ => 1.0,
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa >= 0.0 && kappa < KAPPA_LIMIT {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "kappa = {kappa} must lie in [0, {KAPPA_LIMIT})"
        )))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n <= MAX_EXACT_N {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "n = {n} exceeds the exact-divergence limit {MAX_EXACT_N}"
        )))
    }
}

/// Alternatives `1..=M` to evaluate, in increasing order.
fn choose_alternatives(total: usize, budget: usize, seed: u64) -> (Vec<usize>, Averaging) {
    if total <= budget {
        return ((1..=total).collect(), Averaging::Exhaustive);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = sample(&mut rng, total, budget)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    picks.sort_unstable();
    (picks, Averaging::Sampled)
}

fn separation_check(
    family: &HypothesisFamily,
    indices: &[usize],
    nominal_threshold: f64,
) -> Result<SeparationCheck> {
    let threshold = family.amplitude() * family.kernel.l2_sq().sqrt() / 16.0;
    let mut min_sq = f64::INFINITY;
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for (a, &i) in indices.iter().enumerate() {
        for &j in &indices[a + 1..] {
            let num = l2_separation(family, i, j)?;
            let cf = family.separation_closed_form(i, j)?;
            worst = worst.max((num - cf).abs() / cf);
            min_sq = min_sq.min(num);
            pairs += 1;
        }
    }
    let min_separation = min_sq.sqrt();
    Ok(SeparationCheck {
        min_separation,
        threshold,
        nominal_threshold,
        closed_form_max_rel_err: worst,
        pairs,
        pass: pairs > 0 && min_separation >= threshold && worst <= SEPARATION_REL_TOL,
    })
}

fn class_membership(family: &HypothesisFamily, indices: &[usize]) -> Result<bool> {
    let (p, _) = crate::hypothesis::holder_order(family.alpha);
    let hi = family.upper_bound() * (1.0 + 1e-12);
    for &i in indices {
        let prof = family.profile(i)?;
        let r = holder_report(
            |t| prof.eval(t),
            |t| prof.derivative(p, t),
            family.alpha,
            family.l_const,
            SEMINORM_GRID,
            Some((1.0, hi)),
        );
        if !r.pass {
            return Ok(false);
        }
    }
    Ok(true)
}

fn evaluate_alternative(
    reference: &KlReference,
    spec: &ModelSpec,
    family: &HypothesisFamily,
    index: usize,
    c_bound: f64,
) -> Result<HypothesisEval> {
    let sigma_k = cov_differenced(spec, &family.profile(index)?)?;
    let cmp = reference.compare(&sigma_k, false)?;
    let gap = sigma_k.sub(&reference.sigma0().scale(c_bound))?;
    let bound_value = cmp.bound(c_bound)?.right;
    Ok(HypothesisEval {
        index,
        codeword: bitstring(&family.codewords[index]),
        kl_exact: cmp.kl_exact,
        loewner_certified: is_psd(&gap, DEFAULT_PSD_TOL),
        bound_value,
        bound_holds: cmp.kl_exact <= bound_value + BOUND_SLACK,
    })
}

/// Builds the family and checks conditions (i)–(iii) at finite `n`.
pub fn evaluate(params: &CertificateParams) -> Result<Certificate> {
    check_kappa(params.kappa)?;
    check_n(params.n)?;
    if params.max_hypotheses < 1 {
        return Err(Error::BudgetExceeded(
            "max_hypotheses must be at least 1".into(),
        ));
    }
    let class = model_class(params.model)?;
    let spec = ModelSpec::sufficient(params.model, params.n, params.tau)?;
    let family = build_family(
        params.n,
        params.alpha,
        params.l_const,
        params.c,
        class,
        params.seed,
    )?;
    let total = family.len() - 1;
    let (alternatives, averaging) =
        choose_alternatives(total, params.max_hypotheses, params.seed);

    let null = cov_differenced(&spec, &VolatilityProfile::constant(1.0)?)?;
    let reference = KlReference::new(&null)?;
    let c_bound = frobenius_bound_constant(params.model, params.l_const);
    let evals: Vec<HypothesisEval> = alternatives
        .par_iter()
        .map(|&k| evaluate_alternative(&reference, &spec, &family, k, c_bound))
        .collect::<Result<_>>()?;

    let mut indices = vec![0];
    indices.extend(&alternatives);
    let cond_i = class_membership(&family, &indices)?;
    let nominal = params.c * (params.n as f64).powf(-params.alpha * class.bandwidth_exponent(params.alpha));
    let cond_ii = separation_check(&family, &indices, nominal)?;

    let k = evals.len().max(1) as f64;
    let avg_kl = evals.iter().map(|e| e.kl_exact).sum::<f64>() / k;
    let max_kl = evals.iter().map(|e| e.kl_exact).fold(0.0, f64::max);
    let log2_m = if total > 0 { (total as f64).log2() } else { 0.0 };
    let kappa_bound = params.kappa * log2_m * std::f64::consts::LN_2;
    let cond_iii = DivergenceCheck {
        avg_kl,
        max_kl,
        log2_m,
        kappa_bound,
        averaging,
        pass: avg_kl <= kappa_bound,
    };
    let all_certified = evals.iter().all(|e| e.loewner_certified);
    let avg_bound = evals.iter().map(|e| e.bound_value).sum::<f64>() / k;
    let frobenius_bound = BoundSummary {
        loewner_constant_c: c_bound,
        all_certified,
        avg_bound,
        consistent: evals.iter().all(|e| !e.loewner_certified || e.bound_holds),
        certifies_cond_iii: all_certified && avg_bound <= kappa_bound,
    };
    Ok(Certificate {
        model: params.model.name(),
        n: params.n,
        alpha: params.alpha,
        l_const: params.l_const,
        tau: params.tau,
        c: params.c,
        kappa: params.kappa,
        family: family.descriptor(),
        overall_pass: cond_i && cond_ii.pass && cond_iii.pass,
        cond_i,
        cond_ii,
        cond_iii,
        frobenius_bound,
        hypotheses_evaluated: evals.len(),
        hypotheses: evals,
    })
}

/// Smallest `c` whose family passes the divergence condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalC {
    pub c_star: Option<f64>,
    pub m_star: Option<usize>,
    /// `(m, avg_kl, kappa_bound)` for every family evaluated.
    pub evaluations: Vec<(usize, f64, f64)>,
}

/// Bisection for `c*`. The family depends on `c` only through the bump
/// count `m`, so the search runs over `m ∈ [8, m_max]` and returns the
/// smallest `c` producing the first passing `m`. Assumes the average
/// divergence relative to `κ log M` decreases in `m`.
pub fn critical_c(params: &CertificateParams, m_max: usize) -> Result<CriticalC> {
    let class = model_class(params.model)?;
    let scale = (params.n as f64).powf(class.bandwidth_exponent(params.alpha));
    let c_for = |m: usize| 2.0 * (m as f64 - 1.0) / scale;
    let mut evaluations = Vec::new();
    let mut probe = |m: usize| -> Result<bool> {
        let cert = evaluate(&CertificateParams {
            c: c_for(m) * (1.0 + 1e-9),
            ..params.clone()
        })?;
        evaluations.push((m, cert.cond_iii.avg_kl, cert.cond_iii.kappa_bound));
        Ok(cert.cond_iii.pass)
    };
    let (mut lo, mut hi) = (MIN_BUMPS, m_max.min(crate::hypothesis::MAX_CODE_LENGTH));
    if probe(lo)? {
        return Ok(CriticalC {
            c_star: Some(c_for(lo)),
            m_star: Some(lo),
            evaluations,
        });
    }
    if !probe(hi)? {
        return Ok(CriticalC {
            c_star: None,
            m_star: None,
            evaluations,
        });
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalC {
        c_star: Some(c_for(hi)),
        m_star: Some(hi),
        evaluations,
    })
}

/// Two constant-volatility hypotheses for model 3:
/// `σ²₀ = σ_min`, `σ²₁ = σ_min + c n^{−1/8}`.
pub fn two_point_certificate_m3(
    n: usize,
    sigma_min: f64,
    sigma_max: f64,
    c: f64,
    tau: f64,
    kappa: f64,
) -> Result<Certificate> {
    check_kappa(kappa)?;
    check_n(n)?;
    if !(sigma_min > 0.0 && sigma_min < sigma_max) {
        return Err(Error::InvalidSpec(format!(
            "need 0 < sigma_min < sigma_max, got {sigma_min} and {sigma_max}"
        )));
    }
    if !(c >= 0.0) {
        return Err(Error::InvalidSpec(format!("c = {c} must be non-negative")));
    }
    let gap = c * (n as f64).powf(-0.125);
    let s1 = sigma_min + gap;
    if s1 > sigma_max {
        return Err(Error::InvalidSpec(format!(
            "alternative {s1} exceeds sigma_max = {sigma_max}"
        )));
    }
    let spec = ModelSpec::sufficient(Model::M3, n, tau)?;
    let sigma0 = cov_differenced(&spec, &VolatilityProfile::constant(sigma_min)?)?;
    let sigma1 = cov_differenced(&spec, &VolatilityProfile::constant(s1)?)?;
    let cmp = KlReference::new(&sigma0)?.compare(&sigma1, false)?;
    let bound_value = cmp.bound(1.0)?.right;
    let certified = is_psd(&sigma1.sub(&sigma0)?, DEFAULT_PSD_TOL);
    let kappa_bound = kappa * std::f64::consts::LN_2;
    let eval = HypothesisEval {
        index: 1,
        codeword: "1".into(),
        kl_exact: cmp.kl_exact,
        loewner_certified: certified,
        bound_value,
        bound_holds: cmp.kl_exact <= bound_value + BOUND_SLACK,
    };
    let cond_iii = DivergenceCheck {
        avg_kl: cmp.kl_exact,
        max_kl: cmp.kl_exact,
        log2_m: 1.0,
        kappa_bound,
        averaging: Averaging::Exhaustive,
        pass: cmp.kl_exact <= kappa_bound,
    };
    let cond_ii = SeparationCheck {
        min_separation: gap,
        threshold: gap,
        nominal_threshold: gap,
        closed_form_max_rel_err: 0.0,
        pairs: 1,
        pass: true,
    };
    Ok(Certificate {
        model: Model::M3.name(),
        n,
        alpha: 0.0,
        l_const: 0.0,
        tau,
        c,
        kappa,
        family: json!({
            "kind": "two_point",
            "sigma_sq_0": sigma_min,
            "sigma_sq_1": s1,
            "sigma_max": sigma_max,
            "separation_sq": gap * gap,
        }),
        cond_i: true,
        overall_pass: cond_iii.pass,
        cond_ii,
        cond_iii,
        frobenius_bound: BoundSummary {
            loewner_constant_c: 1.0,
            all_certified: certified,
            avg_bound: bound_value,
            consistent: !certified || eval.bound_holds,
            certifies_cond_iii: certified && bound_value <= kappa_bound,
        },
        hypotheses: vec![eval],
        hypotheses_evaluated: 1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub model: String,
    pub q: Option<f64>,
    pub alpha: f64,
    pub exponent: f64,
}

/// `n`-exponents of the lower bounds: `−α/(4α+2)` for models 1 and 2,
/// `−α/(8α+4)` for model 3, and `−α/((2q+2)(2α+1))` for the kernel
/// `(t−s)^q` family.
pub fn rate_table(alphas: &[f64], qs: &[f64]) -> Vec<RateRow> {
    let mut rows = Vec::new();
    for &alpha in alphas {
        for (name, e) in [
            ("m1", -alpha / (4.0 * alpha + 2.0)),
            ("m2", -alpha / (4.0 * alpha + 2.0)),
            ("m3", -alpha / (8.0 * alpha + 4.0)),
        ] {
            rows.push(RateRow {
                model: name.into(),
                q: None,
                alpha,
                exponent: e,
            });
        }
        for &q in qs {
            rows.push(RateRow {
                model: "mq".into(),
                q: Some(q),
                alpha,
                exponent: -alpha / ((2.0 * q + 2.0) * (2.0 * alpha + 1.0)),
            });
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub kl_exact: f64,
    /// `n^{1/2} h^{2α}` (models 1–2) or `n^{1/4} h^{2α}` (model 3).
    pub prediction: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingTable {
    pub model: String,
    pub alpha: f64,
    #[serde(rename = "l")]
    pub l_const: f64,
    pub tau: f64,
    pub h: f64,
    pub rows: Vec<ScalingRow>,
    pub predicted_slope: f64,
    pub fit: LineFit,
}

/// Bump width of the fixed single-bump alternative.
pub const PROBE_WIDTH: f64 = 0.5;

/// `σ² = 1 + L hᵅ K((t − ½)/h)` with `h = ½` and kernel constant 1.
pub fn probe_profile(alpha: f64, l_const: f64) -> Result<VolatilityProfile> {
    let kernel = BumpKernel::with_constant(alpha, 1.0)?;
    VolatilityProfile::bump_family(
        1.0,
        kernel,
        vec![Bump {
            center: 0.5,
            width: PROBE_WIDTH,
            height: l_const * PROBE_WIDTH.powf(alpha),
        }],
    )
}

/// Exact divergence of one fixed bump alternative from the null across
/// `n`, with the log-log slope.
pub fn kl_scaling_probe(
    model: Model,
    alpha: f64,
    l_const: f64,
    tau: f64,
    ns: &[usize],
) -> Result<ScalingTable> {
    model_class(model)?;
    let power = if model == Model::M3 { 0.25 } else { 0.5 };
    let alt = probe_profile(alpha, l_const)?;
    let null = VolatilityProfile::constant(1.0)?;
    let h2a = PROBE_WIDTH.powf(2.0 * alpha);
    let rows: Vec<ScalingRow> = ns
        .iter()
        .map(|&n| -> Result<ScalingRow> {
            check_n(n)?;
            let spec = ModelSpec::sufficient(model, n, tau)?;
            let s0 = cov_differenced(&spec, &null)?;
            let s1 = cov_differenced(&spec, &alt)?;
            let kl = KlReference::new(&s0)?.compare(&s1, false)?.kl_exact;
            let prediction = (n as f64).powf(power) * h2a;
            Ok(ScalingRow {
                n,
                kl_exact: kl,
                prediction,
                ratio: kl / prediction,
            })
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.kl_exact).collect();
    Ok(ScalingTable {
        model: model.name(),
        alpha,
        l_const,
        tau,
        h: PROBE_WIDTH,
        fit: log_log_fit(&x, &y)?,
        rows,
        predicted_slope: power,
    })
}
