//! Structured matrices `A`, `Q`, `Q⁻¹`, `E`, `V₁` and their sine bases.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::hypothesis::grid_seminorm;
use crate::linalg::{loewner_leq, sym_eigen, sym_eigenvalues, Matrix, SymMatrix, DEFAULT_PSD_TOL};
use crate::profile::VolatilityProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StructuredKind {
    A,
    Q,
    Qinv,
    E,
    V1,
}

/// Tridiagonal `A`: 1 at (1,1), 2 elsewhere on the diagonal, −1 beside it.
pub fn a_matrix(n: usize) -> SymMatrix {
    SymMatrix::from_fn(n, |i, j| match j - i {
        0 if i == 0 => 1.0,
        0 => 2.0,
        1 => -1.0,
        _ => 0.0,
    })
}

/// `Q = (i ∧ j)`.
pub fn q_matrix(n: usize) -> SymMatrix {
    SymMatrix::from_fn(n, |i, _| (i + 1) as f64)
}

/// `Q⁻¹`: 2 on the diagonal except 1 at (n,n), −1 beside it.
pub fn qinv_matrix(n: usize) -> SymMatrix {
    SymMatrix::from_fn(n, |i, j| match j - i {
        0 if i + 1 == n => 1.0,
        0 => 2.0,
        1 => -1.0,
        _ => 0.0,
    })
}

/// Strictly upper triangle of ones.
pub fn e_matrix(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| if j > i { 1.0 } else { 0.0 })
}

/// Ones at (1,2) and (2,1).
pub fn v1_matrix(n: usize) -> SymMatrix {
    let mut v = SymMatrix::zeros(n);
    if n >= 2 {
        v.set(0, 1, 1.0);
    }
    v
}

/// Upper bidiagonal `O` with `Q⁻¹ = O·Oᵗ`.
pub fn o_matrix(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if j == i + 1 {
            -1.0
        } else {
            0.0
        }
    })
}

pub fn build(kind: StructuredKind, n: usize) -> Matrix {
    match kind {
        StructuredKind::A => a_matrix(n).into_matrix(),
        StructuredKind::Q => q_matrix(n).into_matrix(),
        StructuredKind::Qinv => qinv_matrix(n).into_matrix(),
        StructuredKind::E => e_matrix(n),
        StructuredKind::V1 => v1_matrix(n).into_matrix(),
    }
}

/// `x_i = (2i − 1)π/(2n + 1)`, one-based `i`.
fn angle(n: usize, i: usize) -> f64 {
    (2 * i - 1) as f64 * PI / (2 * n + 1) as f64
}

/// Eigenvalues of `A` and `Q⁻¹`, ascending: entry `i − 1` is
/// `4 sin²((2i − 1)π/(4n + 2))`, the `(n − i + 1)`-th largest.
pub fn eigvals_closed(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| {
            let s = ((2 * i - 1) as f64 * PI / (4 * n + 2) as f64).sin();
            4.0 * s * s
        })
        .collect()
}

/// `‖v_i‖²` for `v_i = (sin x_i, …, sin n x_i)`.
fn sine_norm_sq(n: usize, i: usize) -> f64 {
    let x = angle(n, i);
    let nf = n as f64;
    0.5 * nf - ((nf * x).sin() * ((nf + 1.0) * x).cos()) / (2.0 * x.sin())
}

/// Normalised eigenvectors of `Q⁻¹` as columns, paired with
/// [`eigvals_closed`].
pub fn eigvecs_closed(n: usize) -> Matrix {
    let norms: Vec<f64> = (1..=n).map(|i| sine_norm_sq(n, i).sqrt()).collect();
    Matrix::from_fn(n, n, |k, c| {
        ((k + 1) as f64 * angle(n, c + 1)).sin() / norms[c]
    })
}

/// Eigenvectors of `A`: those of `Q⁻¹` with the coordinates reversed.
pub fn eigvecs_closed_a(n: usize) -> Matrix {
    let v = eigvecs_closed(n);
    Matrix::from_fn(n, n, |k, c| v[(n - 1 - k, c)])
}

/// `i²/(4n²)`, a lower bound on the `i`-th smallest eigenvalue.
pub fn eig_lower_bound(n: usize, i: usize) -> Result<f64> {
    if i == 0 || i > n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    Ok((i * i) as f64 / (4 * n * n) as f64)
}

/// Orthonormal eigenbasis of `A`, applied in `O(n log n)` through a padded
/// FFT of length `4n + 2`.
#[derive(Clone)]
pub struct SineBasis {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    inv_norms: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl SineBasis {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(4 * n + 2);
        let inv_norms = (1..=n).map(|i| 1.0 / sine_norm_sq(n, i).sqrt()).collect();
        Self {
            n,
            fft,
            inv_norms,
            eigenvalues: eigvals_closed(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Eigenvalues of `A` in coefficient order (ascending).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `−Im(FFT(y))` at the odd bins `1, 3, …, 2n − 1`.
    fn odd_sine_sums(&self, y: impl Iterator<Item = (usize, f64)>) -> Vec<f64> {
        let mut buf = vec![Complex::new(0.0, 0.0); 4 * self.n + 2];
        for (m, v) in y {
            buf[m].re = v;
        }
        self.fft.process(&mut buf);
        (1..=self.n).map(|i| -buf[2 * i - 1].im).collect()
    }

    /// Coordinates `Uᵗx` in the eigenbasis of `A`.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(x.len(), n, "sine transform length");
        let s = self.odd_sine_sums((1..=n).map(|m| (m, x[n - m])));
        s.iter().zip(&self.inv_norms).map(|(a, b)| a * b).collect()
    }

    /// `U·c`, the inverse of [`SineBasis::forward`].
    pub fn inverse(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(c.len(), n, "sine transform length");
        let mut buf = vec![Complex::new(0.0, 0.0); 4 * n + 2];
        for i in 1..=n {
            buf[2 * i - 1].re = c[i - 1] * self.inv_norms[i - 1];
        }
        self.fft.process(&mut buf);
        (0..n).map(|k| -buf[n - k].im).collect()
    }
}

/// `Uᵗ·data` with `U` the normalised closed-form eigenvectors of `A`.
pub fn sine_transform(data: &[f64]) -> Vec<f64> {
    if data.is_empty() {
        return Vec::new();
    }
    SineBasis::new(data.len()).forward(data)
}

pub fn inverse_sine_transform(coeffs: &[f64]) -> Vec<f64> {
    if coeffs.is_empty() {
        return Vec::new();
    }
    SineBasis::new(coeffs.len()).inverse(coeffs)
}

/// Dense `O(n²)` reference for [`sine_transform`].
pub fn sine_transform_explicit(data: &[f64]) -> Vec<f64> {
    let u = eigvecs_closed_a(data.len());
    u.transpose().matvec(data).expect("square basis")
}

/// Orthonormal eigenbasis of the Dirichlet matrix `T` (2 on the diagonal,
/// −1 beside it): `w_k[j] = √(2/(b+1)) sin(jkπ/(b+1))`, eigenvalue
/// `4 sin²(kπ/(2b+2))`, ascending in `k`.
#[derive(Clone)]
pub struct DirichletBasis {
    b: usize,
    fft: Arc<dyn Fft<f64>>,
    eigenvalues: Vec<f64>,
}

impl DirichletBasis {
    pub fn new(b: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(2 * b + 2);
        let eigenvalues = (1..=b)
            .map(|k| {
                let s = (k as f64 * PI / (2 * b + 2) as f64).sin();
                4.0 * s * s
            })
            .collect();
        Self {
            b,
            fft,
            eigenvalues,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let b = self.b;
        assert_eq!(x.len(), b, "sine transform length");
        let mut buf = vec![Complex::new(0.0, 0.0); 2 * b + 2];
        for j in 1..=b {
            buf[j].re = x[j - 1];
        }
        self.fft.process(&mut buf);
        let scale = (2.0 / (b + 1) as f64).sqrt();
        (1..=b).map(|k| -buf[k].im * scale).collect()
    }
}

/// `T = tridiag(−1, 2, −1)` of size `b`.
pub fn dirichlet_matrix(b: usize) -> SymMatrix {
    SymMatrix::from_fn(b, |i, j| match j - i {
        0 => 2.0,
        1 => -1.0,
        _ => 0.0,
    })
}

/// Serialised outcome of one verification.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    #[serde(rename = "lemma")]
    pub statement: String,
    pub n: usize,
    pub parameters: Value,
    pub max_abs_residual: f64,
    pub pass: bool,
}

/// Closed-form spectrum of `A` and `Q⁻¹` against the Jacobi solver, the
/// lower bound `i²/(4n²)` and `Q⁻¹ = O·Oᵗ`.
pub fn verify_spectrum(n: usize, tol: f64) -> Result<VerificationReport> {
    let closed = eigvals_closed(n);
    let residuals = [a_matrix(n), qinv_matrix(n)]
        .par_iter()
        .map(|m| {
            let num = sym_eigen(m, 1e-12)?;
            Ok(num
                .values
                .iter()
                .rev()
                .zip(&closed)
                .map(|(v, c)| (v - c).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let residual = residuals[0].max(residuals[1]);
    let mut bound_ok = true;
    for (i, v) in closed.iter().enumerate() {
        bound_ok &= *v >= eig_lower_bound(n, i + 1)?;
    }
    let o = o_matrix(n);
    let oot = o.matmul(&o.transpose())?;
    let factor_err = oot.max_abs_diff(qinv_matrix(n).as_matrix());
    Ok(VerificationReport {
        statement: "eigenvalues of A and Q^-1 equal 4 sin^2((2i-1)pi/(4n+2)) >= i^2/(4n^2)".into(),
        n,
        parameters: json!({
            "tol": tol,
            "lower_bound_holds": bound_ok,
            "qinv_equals_o_ot_residual": factor_err,
            "ordering": "ascending; entry i-1 is the (n-i+1)-th largest eigenvalue",
        }),
        max_abs_residual: residual,
        pass: residual <= tol && bound_ok && factor_err == 0.0,
    })
}

/// Outcome of the Loewner check `(2 + 12L²)⁻¹ Q ≤ Σ Q Σ`.
#[derive(Clone, Debug, Serialize)]
pub struct PosdefmajReport {
    pub n: usize,
    pub l_const: f64,
    pub constant: f64,
    /// `λ_min(ΣQΣ − (2+12L²)⁻¹Q)`.
    pub min_eigenvalue: f64,
    pub q_frobenius: f64,
    pub loewner_holds: bool,
    pub pass: bool,
}

impl PosdefmajReport {
    pub fn to_verification(&self) -> VerificationReport {
        VerificationReport {
            statement: "(2+12L^2)^-1 Q <= Sigma Q Sigma for Lipschitz sigma >= 1".into(),
            n: self.n,
            parameters: json!({
                "L": self.l_const,
                "constant": self.constant,
                "min_eigenvalue": self.min_eigenvalue,
                "q_frobenius": self.q_frobenius,
            }),
            max_abs_residual: (-self.min_eigenvalue).max(0.0),
            pass: self.pass,
        }
    }
}

/// Checks the Loewner inequality for `σ = √profile` on the grid `i/n`.
///
/// `σ` must be at least 1 and Lipschitz with constant `L` on a 4097-point
/// grid, otherwise [`Error::ProfileOutOfClass`].
pub fn verify_posdefmaj(profile: &VolatilityProfile, l_const: f64, n: usize) -> Result<PosdefmajReport> {
    let sigma = |t: f64| profile.sigma(t);
    let lip = grid_seminorm(sigma, 1.0, 0.0, 1.0, 4097);
    if lip > l_const * (1.0 + 1e-6) {
        return Err(Error::ProfileOutOfClass(format!(
            "sigma has Lipschitz constant {lip} > L = {l_const}"
        )));
    }
    let min_sigma = (0..=4096)
        .map(|k| sigma(k as f64 / 4096.0))
        .fold(f64::INFINITY, f64::min);
    if min_sigma < 1.0 {
        return Err(Error::ProfileOutOfClass(format!("sigma dips to {min_sigma} < 1")));
    }
    let s: Vec<f64> = (1..=n).map(|i| sigma(i as f64 / n as f64)).collect();
    let q = q_matrix(n);
    let sqs = SymMatrix::from_fn(n, |i, j| s[i] * q.get(i, j) * s[j]);
    let constant = 1.0 / (2.0 + 12.0 * l_const * l_const);
    let lo = q.scale(constant);
    let loewner_holds = loewner_leq(&lo, &sqs, DEFAULT_PSD_TOL)?;
    let diff = sqs.sub(&lo)?;
    let min_eigenvalue = *sym_eigenvalues(&diff)?.last().unwrap_or(&0.0);
    let q_frobenius = q.frobenius_norm();
    Ok(PosdefmajReport {
        n,
        l_const,
        constant,
        min_eigenvalue,
        q_frobenius,
        loewner_holds,
        pass: loewner_holds && min_eigenvalue >= -DEFAULT_PSD_TOL * q_frobenius,
    })
}

/// Outcome of [`verify_posdefmaj`] over many random profiles.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosdefmajSweep {
    pub profiles: usize,
    pub ns: Vec<usize>,
    pub seed: u64,
    pub evaluations: usize,
    pub failures: usize,
    /// Smallest `λ_min(ΣQΣ − (2+12L²)⁻¹Q) / ‖Q‖_F`.
    pub worst_relative_margin: f64,
    pub pass: bool,
}

/// [`verify_posdefmaj`] for `profiles` seeded Lipschitz profiles with
/// `L ∈ [0.1, 3]` at every size in `ns`. Profile `r` draws from the
/// stream `(seed, r)`.
pub fn posdefmaj_sweep(profiles: usize, ns: &[usize], seed: u64) -> Result<PosdefmajSweep> {
    let reports: Vec<Vec<PosdefmajReport>> = (0..profiles)
        .into_par_iter()
        .map(|r| {
            let mut rng = crate::montecarlo::replicate_rng(seed, r as u64);
            let l = rng.gen_range(0.1..3.0);
            let profile = VolatilityProfile::random_lipschitz(&mut rng, l)?;
            ns.iter().map(|&n| verify_posdefmaj(&profile, l, n)).collect()
        })
        .collect::<Result<_>>()?;
    let all: Vec<&PosdefmajReport> = reports.iter().flatten().collect();
    let failures = all.iter().filter(|r| !r.pass).count();
    Ok(PosdefmajSweep {
        profiles,
        ns: ns.to_vec(),
        seed,
        evaluations: all.len(),
        failures,
        worst_relative_margin: all
            .iter()
            .map(|r| r.min_eigenvalue / r.q_frobenius)
            .fold(f64::INFINITY, f64::min),
        pass: failures == 0,
    })
}
