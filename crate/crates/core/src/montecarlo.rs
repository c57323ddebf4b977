//! Seeded Gaussian sampling, a spectral maximum-likelihood estimator for
//! constant volatility, and Monte Carlo rate experiments.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covariance::Model;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix, SymMatrix};
use crate::profile::VolatilityProfile;
use crate::quadrature;
use crate::spectral::{DirichletBasis, SineBasis};
use crate::stats::{log_log_fit, mean_se, variance_se, LineFit};

/// Search interval for `σ²`.
pub const MLE_BRACKET: (f64, f64) = (1e-8, 1e4);
/// Absolute step tolerance of the root search.
pub const MLE_TOL: f64 = 1e-10;
const MLE_MAX_ITER: usize = 200;
/// Shortest block accepted by [`binned_estimator`].
pub const MIN_BLOCK: usize = 16;
pub const MIN_REPS: usize = 2;

/// SplitMix64 finaliser of `seed + stream·γ`.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for replicate `r`; independent of scheduling.
pub fn replicate_rng(seed: u64, r: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, r))
}

/// `reps` rows drawn from `N(0, Σ)`. Row `r` depends only on `(seed, r)`.
pub fn sample_gaussian(sigma: &SymMatrix, reps: usize, seed: u64) -> Result<Matrix> {
    let chol = Cholesky::factor(sigma)?;
    let n = sigma.n();
    let rows: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            chol.lower_mul(&z)
        })
        .collect();
    let mut out = Matrix::zeros(reps, n);
    for (r, row) in rows.into_iter().enumerate() {
        out.row_mut(r).copy_from_slice(&row);
    }
    Ok(out)
}

/// `∫_{(i−1)/n}^{i/n} σ²` for each `i`.
pub fn increment_variances(profile: &VolatilityProfile, n: usize) -> Result<Vec<f64>> {
    let dt = 1.0 / n as f64;
    (0..n)
        .map(|i| {
            let (a, b) = (i as f64 * dt, (i + 1) as f64 * dt);
            match profile.constant_on(a, b) {
                Some(v) => Ok(v * dt),
                None => profile.integral(a, b, 1e-14 * dt),
            }
        })
        .collect()
}

/// First differences of model-1 observations `Y_i = X_{i/n} + τε_i`:
/// `ΔY_i = ∫σ dW + τ(ε_i − ε_{i−1})` with `ε_0 = 0`. Exact in law.
pub fn simulate_m1_diff(variances: &[f64], tau: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut prev = 0.0;
    variances
        .iter()
        .map(|v| {
            let z: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let d = v.sqrt() * z + tau * (e - prev);
            prev = e;
            d
        })
        .collect()
}

/// Log-likelihood of independent coordinates with variances
/// `s·dt + τ²λ_i`, up to a constant.
pub fn profile_loglik(coeffs: &[f64], lambdas: &[f64], dt: f64, tau: f64, s: f64) -> f64 {
    let t2 = tau * tau;
    -0.5 * coeffs
        .iter()
        .zip(lambdas)
        .map(|(c, l)| {
            let v = s * dt + t2 * l;
            v.ln() + c * c / v
        })
        .sum::<f64>()
}

/// Score and its derivative in `s`.
fn score(coeffs: &[f64], lambdas: &[f64], dt: f64, tau: f64, s: f64) -> (f64, f64) {
    let t2 = tau * tau;
    let (mut g, mut h) = (0.0, 0.0);
    for (c, l) in coeffs.iter().zip(lambdas) {
        let v = s * dt + t2 * l;
        let c2 = c * c;
        g += (c2 / v - 1.0) / v;
        h += (1.0 - 2.0 * c2 / v) / (v * v);
    }
    (0.5 * dt * g, 0.5 * dt * dt * h)
}

fn failure(coeffs: &[f64], lambdas: &[f64], dt: f64, tau: f64, reason: String) -> Error {
    let (lo, hi) = MLE_BRACKET;
    let profile = (0..=16)
        .map(|k| {
            let s = lo * (hi / lo).powf(k as f64 / 16.0);
            (s, profile_loglik(coeffs, lambdas, dt, tau, s))
        })
        .collect();
    Error::OptimizationFailure { reason, profile }
}

/// Maximiser over [`MLE_BRACKET`] of [`profile_loglik`], by Newton steps
/// on the score kept inside a shrinking sign-change bracket. A score that
/// is non-positive at the lower end gives the boundary maximiser.
pub fn mle_from_coefficients(coeffs: &[f64], lambdas: &[f64], dt: f64, tau: f64) -> Result<f64> {
    let (mut lo, mut hi) = MLE_BRACKET;
    let g_lo = score(coeffs, lambdas, dt, tau, lo).0;
    let g_hi = score(coeffs, lambdas, dt, tau, hi).0;
    if g_lo <= 0.0 && g_hi <= 0.0 {
        return Ok(lo);
    }
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(failure(
            coeffs,
            lambdas,
            dt,
            tau,
            format!("score does not change sign on the bracket ({g_lo:e}, {g_hi:e})"),
        ));
    }
    // initial guess: realised-variance moment estimate
    let t2 = tau * tau;
    let guess = coeffs
        .iter()
        .zip(lambdas)
        .map(|(c, l)| c * c - t2 * l)
        .sum::<f64>()
        / (coeffs.len() as f64 * dt);
    let mut s = if guess > lo && guess < hi { guess } else { (lo * hi).sqrt() };
    for _ in 0..MLE_MAX_ITER {
        let (g, h) = score(coeffs, lambdas, dt, tau, s);
        if g > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - g / h;
        let next = if h < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - s).abs() <= MLE_TOL * s.max(1.0) || hi - lo <= MLE_TOL * s.max(1.0) {
            return Ok(next);
        }
        s = next;
    }
    Err(failure(
        coeffs,
        lambdas,
        dt,
        tau,
        format!("no convergence in {MLE_MAX_ITER} iterations"),
    ))
}

/// Exact Gaussian MLE of constant `σ²` from first-differenced model-1 data
/// with known `τ`.
pub fn mle_const_sigma_m1(diff_data: &[f64], n: usize, tau: f64) -> Result<f64> {
    if diff_data.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: diff_data.len(),
        });
    }
    mle_with_basis(&SineBasis::new(n), diff_data, tau)
}

/// [`mle_const_sigma_m1`] with a prepared basis of size `n`.
pub fn mle_with_basis(basis: &SineBasis, diff_data: &[f64], tau: f64) -> Result<f64> {
    let n = basis.n();
    let coeffs = basis.forward(diff_data);
    mle_from_coefficients(&coeffs, basis.eigenvalues(), 1.0 / n as f64, tau)
}

/// Piecewise-constant `σ̂²` from per-block likelihoods.
#[derive(Clone, Debug)]
pub struct BinnedEstimate {
    pub values: Vec<f64>,
    pub profile: VolatilityProfile,
}

impl BinnedEstimate {
    /// `∫₀¹ (σ̂² − σ²)²`.
    pub fn ise(&self, truth: &VolatilityProfile) -> Result<f64> {
        let mut breaks = vec![0.0, 1.0];
        let k = self.values.len();
        breaks.extend((1..k).map(|j| j as f64 / k as f64));
        for p in truth.pieces() {
            breaks.push(p.a);
            breaks.push(p.b);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        quadrature::adaptive_pieces(
            |t| (self.profile.eval(t) - truth.eval(t)).powi(2),
            &breaks,
            1e-12,
        )
    }
}

/// Blockwise MLE. The first block keeps the boundary row of `A`; later
/// blocks see `tridiag(−1, 2, −1)`, which the Dirichlet sine basis
/// diagonalises.
pub fn binned_estimator(diff_data: &[f64], n: usize, tau: f64, bins: usize) -> Result<BinnedEstimate> {
    if diff_data.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: diff_data.len(),
        });
    }
    if bins == 0 || n % bins != 0 {
        return Err(Error::InvalidSpec(format!("{bins} bins do not divide n = {n}")));
    }
    let b = n / bins;
    if b < MIN_BLOCK {
        return Err(Error::BlockTooSmall { len: b });
    }
    let dt = 1.0 / n as f64;
    let first = SineBasis::new(b);
    let rest = DirichletBasis::new(b);
    let values = diff_data
        .chunks(b)
        .enumerate()
        .map(|(k, block)| {
            if k == 0 {
                mle_from_coefficients(&first.forward(block), first.eigenvalues(), dt, tau)
            } else {
                mle_from_coefficients(&rest.forward(block), rest.eigenvalues(), dt, tau)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let breaks = (0..=bins).map(|j| j as f64 / bins as f64).collect();
    let profile = VolatilityProfile::piecewise_constant(breaks, values.clone())?;
    Ok(BinnedEstimate { values, profile })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Spectral exact MLE.
    Mle,
    /// Uncorrected realised variance `Σ ΔY_i²`.
    Rv,
    /// `Σ ΔY_i² − τ²(2n − 1)`.
    RvDebiased,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mle => "mle",
            Estimator::Rv => "rv",
            Estimator::RvDebiased => "rv_debiased",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(Estimator::Mle),
            "rv" => Ok(Estimator::Rv),
            "rv_debiased" => Ok(Estimator::RvDebiased),
            other => Err(Error::InvalidSpec(format!("unknown estimator {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateConfig {
    pub model: Model,
    pub estimator: Estimator,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub tau: f64,
    pub sigma_sq: f64,
}

impl RateConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.model, Model::M1 | Model::M2) {
            return Err(Error::Unsupported(
                "rate experiments simulate constant volatility in models m1 and m2".into(),
            ));
        }
        if self.reps < MIN_REPS {
            return Err(Error::InvalidSpec(format!("reps = {} below {MIN_REPS}", self.reps)));
        }
        if self.ns.len() < 2 || self.ns.windows(2).any(|w| w[0] >= w[1]) || self.ns[0] < 2 {
            return Err(Error::InvalidSpec(
                "ns must hold at least two ascending sizes ≥ 2".into(),
            ));
        }
        if !(self.tau >= 0.0 && self.sigma_sq > 0.0) {
            return Err(Error::InvalidSpec("need tau ≥ 0 and sigma_sq > 0".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex_digest(&bytes)
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub n: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub mse: f64,
    pub mse_se: f64,
    pub var: f64,
    pub var_se: f64,
    /// `Var(n^{1/4}(σ̂² − σ²)) = n^{1/2}·var`.
    pub scaled_var: f64,
    pub scaled_var_se: f64,
    /// `n^{1/4}·var`, the literal reading of an `n^{−1/4}` variance.
    pub literal_scaled_var: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub model: String,
    pub estimator: Estimator,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub tau: f64,
    pub sigma_sq: f64,
    pub rows: Vec<ExperimentRow>,
    /// `log₂ mse` on `log₂ n`.
    pub fit: LineFit,
    /// `8τσ³`.
    pub efficient_variance: f64,
    pub version: String,
    pub config_hash: String,
}

impl ExperimentResult {
    /// One row per `n`: `model, estimator, n, mse, mse_se, var, var_se,
    /// reps, seed`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "model", "estimator", "n", "mse", "mse_se", "var", "var_se", "reps", "seed",
        ])?;
        for r in &self.rows {
            w.write_record([
                self.model.clone(),
                self.estimator.name().to_string(),
                r.n.to_string(),
                r.mse.to_string(),
                r.mse_se.to_string(),
                r.var.to_string(),
                r.var_se.to_string(),
                self.reps.to_string(),
                self.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn estimate(
    estimator: Estimator,
    basis: &SineBasis,
    data: &[f64],
    tau: f64,
) -> Result<f64> {
    let n = data.len() as f64;
    match estimator {
        Estimator::Mle => mle_with_basis(basis, data, tau),
        Estimator::Rv => Ok(data.iter().map(|x| x * x).sum()),
        Estimator::RvDebiased => {
            Ok(data.iter().map(|x| x * x).sum::<f64>() - tau * tau * (2.0 * n - 1.0))
        }
    }
}

/// Monte Carlo risk of `estimator` at each `n` for constant `σ²`, and the
/// log-log slope of the MSE. Replicate `r` at size `n` draws from the
/// stream `(seed, n, r)`.
pub fn rate_experiment(cfg: &RateConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let truth = cfg.sigma_sq;
    let mut rows = Vec::with_capacity(cfg.ns.len());
    for &n in &cfg.ns {
        let basis = SineBasis::new(n);
        let variances = vec![truth / n as f64; n];
        let seed_n = stream_seed(cfg.seed, n as u64);
        let est: Vec<f64> = (0..cfg.reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(seed_n, r as u64);
                let data = simulate_m1_diff(&variances, cfg.tau, &mut rng);
                estimate(cfg.estimator, &basis, &data, cfg.tau)
            })
            .collect::<Result<_>>()?;
        let sq: Vec<f64> = est.iter().map(|e| (e - truth).powi(2)).collect();
        let (mean, mean_err) = mean_se(&est);
        let (mse, mse_se) = mean_se(&sq);
        let (var, var_se) = variance_se(&est);
        let root = (n as f64).sqrt();
        rows.push(ExperimentRow {
            n,
            mean,
            mean_se: mean_err,
            mse,
            mse_se,
            var,
            var_se,
            scaled_var: root * var,
            scaled_var_se: root * var_se,
            literal_scaled_var: root.sqrt() * var,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mse).collect();
    Ok(ExperimentResult {
        model: cfg.model.name(),
        estimator: cfg.estimator,
        ns: cfg.ns.clone(),
        reps: cfg.reps,
        seed: cfg.seed,
        tau: cfg.tau,
        sigma_sq: truth,
        fit: log_log_fit(&x, &y)?,
        rows,
        efficient_variance: 8.0 * cfg.tau * truth.powf(1.5),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
    })
}
