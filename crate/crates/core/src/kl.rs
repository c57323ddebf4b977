//! Kullback–Leibler divergence between centred Gaussians and its
//! Frobenius-norm upper bounds. All logarithms are natural.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::random::{random_gram, random_symmetric};
use crate::linalg::{sym_eigenvalues, Cholesky, Matrix, SymMatrix};
use crate::montecarlo::replicate_rng;

/// Supports up to this size use the spectral route by default.
pub const SPECTRAL_SUPPORT_LIMIT: usize = 600;
/// Slack in `kl_exact ≤ bound`.
pub const BOUND_SLACK: f64 = 1e-9;

/// How [`KlReference::compare`] evaluated the divergence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KlRoute {
    /// Eigenvalues `w` of `Σ₀^{-1/2}(Σ₁ − Σ₀)Σ₀^{-1/2}` on the support;
    /// `KL = ½ Σ (w − ln(1 + w))`.
    Spectral,
    /// `KL = ½ (tr(Σ₀⁻¹Δ) − ln det Σ₁ + ln det Σ₀)`.
    TraceLogdet,
    /// `Σ₁ = Σ₀` exactly.
    Identical,
}

/// Quantities shared by the exact divergence and its bounds.
#[derive(Clone, Debug, Serialize)]
pub struct KlComparison {
    pub n: usize,
    /// Rows of `Δ = Σ₁ − Σ₀` with a nonzero entry.
    pub support: usize,
    pub route: KlRoute,
    pub kl_exact: f64,
    /// `tr(Σ₀⁻¹Δ)`.
    pub trace: f64,
    /// `‖Σ₀⁻¹Δ‖_F² = ‖Σ₀⁻¹Σ₁ − I‖_F²`.
    pub right_norm_sq: f64,
    /// `‖Σ₀^{-1/2}ΔΣ₀^{-1/2}‖_F²`.
    pub middle_norm_sq: f64,
    /// `λ_min(Σ₀^{-1/2}Σ₁Σ₀^{-1/2})` when the spectrum was computed.
    pub min_generalized_eigenvalue: Option<f64>,
}

/// Factorised null covariance, reused across alternatives.
pub struct KlReference {
    sigma0: SymMatrix,
    chol: Cholesky,
}

impl KlReference {
    pub fn new(sigma0: &SymMatrix) -> Result<Self> {
        Ok(Self {
            chol: Cholesky::factor(sigma0)?,
            sigma0: sigma0.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.sigma0.n()
    }

    pub fn sigma0(&self) -> &SymMatrix {
        &self.sigma0
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// Compares against `Σ₁`. Only rows in the support of `Δ` are touched,
    /// so banded nulls with localised alternatives cost `O(n·|S| + |S|³)`.
    /// `want_spectrum` forces the spectral route regardless of `|S|`.
    pub fn compare(&self, sigma1: &SymMatrix, want_spectrum: bool) -> Result<KlComparison> {
        let n = self.n();
        if sigma1.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: sigma1.n(),
            });
        }
        let s0 = &self.sigma0;
        let delta_row = |i: usize| -> Vec<f64> {
            sigma1
                .row(i)
                .iter()
                .zip(s0.row(i))
                .map(|(a, b)| a - b)
                .collect()
        };
        let support: Vec<usize> = (0..n)
            .filter(|&i| sigma1.row(i).iter().zip(s0.row(i)).any(|(a, b)| a != b))
            .collect();
        let k = support.len();
        if k == 0 {
            return Ok(KlComparison {
                n,
                support: 0,
                route: KlRoute::Identical,
                kl_exact: 0.0,
                trace: 0.0,
                right_norm_sq: 0.0,
                middle_norm_sq: 0.0,
                min_generalized_eigenvalue: Some(1.0),
            });
        }
        // X = Σ₀⁻¹Δ, columns in S; keep only rows in S
        let mut xs = Matrix::zeros(k, k);
        let mut trace = 0.0;
        let mut right = 0.0;
        for (c, &j) in support.iter().enumerate() {
            let mut x = delta_row(j);
            self.chol.solve_in_place(&mut x);
            trace += x[j];
            right += x.iter().map(|v| v * v).sum::<f64>();
            for (r, &i) in support.iter().enumerate() {
                xs[(r, c)] = x[i];
            }
        }
        let mut middle = 0.0;
        for r in 0..k {
            for c in 0..k {
                middle += xs[(r, c)] * xs[(c, r)];
            }
        }
        if want_spectrum || k <= SPECTRAL_SUPPORT_LIMIT {
            let w = self.support_spectrum(sigma1, &support)?;
            let w_min = w.last().copied().unwrap_or(0.0);
            if 1.0 + w_min <= 0.0 {
                Cholesky::factor(sigma1)?;
                return Err(Error::NotPositiveDefinite {
                    pivot: 0,
                    value: 1.0 + w_min,
                });
            }
            let kl = 0.5 * w.iter().map(|&x| x - ln1p_remainder(x)).sum::<f64>();
            let floor = if k < n { w_min.min(0.0) } else { w_min };
            Ok(KlComparison {
                n,
                support: k,
                route: KlRoute::Spectral,
                kl_exact: kl.max(0.0),
                trace,
                right_norm_sq: right,
                middle_norm_sq: middle,
                min_generalized_eigenvalue: Some(1.0 + floor),
            })
        } else {
            let c1 = Cholesky::factor(sigma1)?;
            let logdet_ratio: f64 = (0..n)
                .map(|i| 2.0 * (c1.diag(i) / self.chol.diag(i)).ln())
                .sum();
            Ok(KlComparison {
                n,
                support: k,
                route: KlRoute::TraceLogdet,
                kl_exact: (0.5 * (trace - logdet_ratio)).max(0.0),
                trace,
                right_norm_sq: right,
                middle_norm_sq: middle,
                min_generalized_eigenvalue: None,
            })
        }
    }

    /// Eigenvalues (descending) of `Lᵗ Δ_SS L` with `L Lᵗ = (Σ₀⁻¹)_SS`.
    fn support_spectrum(&self, sigma1: &SymMatrix, support: &[usize]) -> Result<Vec<f64>> {
        let n = self.n();
        let k = support.len();
        let mut g = Matrix::zeros(k, k);
        for (c, &j) in support.iter().enumerate() {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            self.chol.solve_in_place(&mut e);
            for (r, &i) in support.iter().enumerate() {
                g[(r, c)] = e[i];
            }
        }
        let g = g.symmetric_part()?;
        let l = Cholesky::factor(&g)?.to_lower();
        let d = SymMatrix::from_fn(k, |r, c| {
            let (i, j) = (support[r], support[c]);
            sigma1.get(i, j) - self.sigma0.get(i, j)
        });
        sym_eigenvalues(&d.congruence(&l)?)
    }
}

/// `ln(1 + x)`, with a series near zero so that `x − ln(1 + x)` keeps full
/// relative precision.
fn ln1p_remainder(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        // x − x²/2 + x³/3 − x⁴/4 + x⁵/5
        x - x * x * (0.5 - x * (1.0 / 3.0 - x * (0.25 - x / 5.0)))
    } else {
        x.ln_1p()
    }
}

/// `½(tr(Σ₀⁻¹Σ₁) − n − ln det(Σ₀⁻¹Σ₁))`, the divergence of `N(0, Σ₁)`
/// from `N(0, Σ₀)`.
pub fn kl_exact(sigma0: &SymMatrix, sigma1: &SymMatrix) -> Result<f64> {
    if sigma0.n() != sigma1.n() {
        return Err(Error::DimensionMismatch {
            expected: sigma0.n(),
            found: sigma1.n(),
        });
    }
    Cholesky::factor(sigma1)?;
    Ok(KlReference::new(sigma0)?.compare(sigma1, false)?.kl_exact)
}

/// Right and middle forms of the Frobenius bound, both scaled by
/// `1/(4C²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KlBound {
    /// `‖Σ₀⁻¹Σ₁ − I‖_F² / (4C²)`.
    pub right: f64,
    /// `‖Σ₀^{-1/2}(Σ₁ − Σ₀)Σ₀^{-1/2}‖_F² / (4C²)`.
    pub middle: f64,
}

pub fn check_c(c: f64) -> Result<()> {
    if c > 0.0 && c <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidC(c))
    }
}

impl KlComparison {
    pub fn bound(&self, c: f64) -> Result<KlBound> {
        check_c(c)?;
        let s = 1.0 / (4.0 * c * c);
        Ok(KlBound {
            right: s * self.right_norm_sq,
            middle: s * self.middle_norm_sq,
        })
    }

    /// Largest `C ≤ 1` with `CΣ₀ ≤ Σ₁`, if the spectrum is known.
    pub fn loewner_constant(&self) -> Option<f64> {
        self.min_generalized_eigenvalue.map(|l| l.min(1.0))
    }
}

/// The Frobenius bound for `0 < CΣ₀ ≤ Σ₁`; the Loewner precondition is the
/// caller's responsibility.
pub fn kl_bound(sigma0: &SymMatrix, sigma1: &SymMatrix, c: f64) -> Result<KlBound> {
    check_c(c)?;
    KlReference::new(sigma0)?.compare(sigma1, false)?.bound(c)
}

/// `¼‖Σ₀⁻¹Σ₁ − I‖_F² + ¼‖Σ₁⁻¹Σ₀ − I‖_F²`.
pub fn kl_bound_symmetrized(sigma0: &SymMatrix, sigma1: &SymMatrix) -> Result<f64> {
    let forward = KlReference::new(sigma0)?.compare(sigma1, false)?;
    let backward = KlReference::new(sigma1)?.compare(sigma0, false)?;
    Ok(0.25 * (forward.right_norm_sq + backward.right_norm_sq))
}

/// `λ_min(Σ₀^{-1/2}Σ₁Σ₀^{-1/2})`, clamped to `(0, 1]`.
pub fn find_loewner_constant(sigma0: &SymMatrix, sigma1: &SymMatrix) -> Result<f64> {
    let cmp = KlReference::new(sigma0)?.compare(sigma1, true)?;
    let c = cmp.loewner_constant().unwrap_or(1.0);
    if c <= 0.0 {
        return Err(Error::NotPositiveDefinite { pivot: 0, value: c });
    }
    Ok(c)
}

/// Flat summary of one exact-versus-bound comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KlReport {
    pub n: usize,
    pub kl_exact: f64,
    pub bound_value: f64,
    pub loewner_constant_c: f64,
    pub bound_holds: bool,
    pub ratio: f64,
}

impl KlReport {
    pub fn new(n: usize, kl_exact: f64, bound_value: f64, c: f64) -> Self {
        Self {
            n,
            kl_exact,
            bound_value,
            loewner_constant_c: c,
            bound_holds: kl_exact <= bound_value + BOUND_SLACK,
            ratio: if bound_value == 0.0 {
                0.0
            } else {
                kl_exact / bound_value
            },
        }
    }
}

/// Exact divergence and the right-hand bound at the discovered `C`.
pub fn kl_report(sigma0: &SymMatrix, sigma1: &SymMatrix) -> Result<KlReport> {
    let cmp = KlReference::new(sigma0)?.compare(sigma1, true)?;
    let c = cmp.loewner_constant().unwrap_or(1.0);
    if c <= 0.0 {
        return Err(Error::NotPositiveDefinite { pivot: 0, value: c });
    }
    let bound = cmp.bound(c)?;
    Ok(KlReport::new(sigma0.n(), cmp.kl_exact, bound.right, c))
}

/// Outcome of a randomised check of the Frobenius bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValiditySweep {
    pub trials: usize,
    pub max_n: usize,
    pub seed: u64,
    /// Trials with `kl_exact > right + BOUND_SLACK`.
    pub bound_violations: usize,
    /// Trials with the middle form above the right form.
    pub middle_violations: usize,
    /// Largest `kl_exact / right`.
    pub max_ratio: f64,
    /// Smallest Loewner constant drawn.
    pub min_c: f64,
    pub pass: bool,
}

/// Random pair for trial `r`: `Σ₀` SPD and `Σ₁` one of a PSD
/// perturbation of `Σ₀`, an independent SPD matrix, or a symmetric
/// perturbation kept positive definite.
fn random_pair(rng: &mut impl Rng, max_n: usize, r: usize) -> (SymMatrix, SymMatrix) {
    let n = rng.gen_range(1..=max_n);
    let (extra, shift0) = (rng.gen_range(0..4), rng.gen_range(0.05..1.0));
    let s0 = random_gram(rng, n, n + extra, shift0);
    let s1 = match r % 3 {
        0 => {
            let (rank, scale) = (rng.gen_range(1..=n), rng.gen_range(0.01..2.0));
            s0.add(&random_gram(rng, n, rank, 0.0).scale(scale))
        }
        1 => {
            let shift1 = rng.gen_range(0.05..1.0);
            Ok(random_gram(rng, n, n + 2, shift1))
        }
        _ => {
            let p = random_symmetric(rng, n);
            let lmin = *sym_eigenvalues(&s0).expect("symmetric input").last().unwrap_or(&1.0);
            let pn = p.frobenius_norm().max(f64::MIN_POSITIVE);
            s0.add(&p.scale(rng.gen_range(0.05..0.95) * lmin / pn))
        }
    }
    .expect("equal sizes");
    (s0, s1)
}

/// `trials` random pairs with `n ≤ max_n`. `C` comes from the generalized
/// spectrum of each pair; trial `r` draws from the stream `(seed, r)`.
pub fn bound_validity_sweep(trials: usize, max_n: usize, seed: u64) -> Result<ValiditySweep> {
    if trials == 0 || max_n == 0 {
        return Err(Error::InvalidSpec("need at least one trial of size at least 1".into()));
    }
    let outcomes: Vec<(bool, bool, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            let (s0, s1) = random_pair(&mut rng, max_n, r);
            let cmp = KlReference::new(&s0)?.compare(&s1, true)?;
            let c = cmp.loewner_constant().unwrap_or(1.0);
            let b = cmp.bound(c)?;
            let ok = cmp.kl_exact <= b.right + BOUND_SLACK;
            let mid_ok = b.middle <= b.right * (1.0 + 1e-10) + BOUND_SLACK;
            let ratio = if b.right > 0.0 { cmp.kl_exact / b.right } else { 0.0 };
            Ok((ok, mid_ok, ratio, c))
        })
        .collect::<Result<_>>()?;
    let bound_violations = outcomes.iter().filter(|o| !o.0).count();
    let middle_violations = outcomes.iter().filter(|o| !o.1).count();
    Ok(ValiditySweep {
        trials,
        max_n,
        seed,
        bound_violations,
        middle_violations,
        max_ratio: outcomes.iter().map(|o| o.2).fold(0.0, f64::max),
        min_c: outcomes.iter().map(|o| o.3).fold(1.0, f64::min),
        pass: bound_violations == 0 && middle_violations == 0,
    })
}
