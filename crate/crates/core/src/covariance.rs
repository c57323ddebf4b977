//! Exact covariances of the observation models and their differenced
//! sufficient statistics.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix};
use crate::profile::VolatilityProfile;
use crate::quadrature;
use crate::spectral;

/// Absolute tolerance for covariance quadrature, applied to integrals
/// normalised to unit intervals.
pub const COV_TOL: f64 = 1e-12;

/// Observation model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// `Y_i = X_{i/n} + τε_i`, `X_t = ∫₀ᵗ σ dW`.
    M1,
    /// `Y_i = σ(i/n) W_{i/n} + τε_i`.
    M2,
    /// `Y_i = ∫₀^{i/n} X_s ds + τε_i`.
    M3,
    /// Signal kernel `(t − s)^q`.
    Mq(f64),
}

impl Model {
    /// Exponent `q` of the signal kernel, `None` for the pointwise model 2.
    pub fn kernel_power(self) -> Option<f64> {
        match self {
            Model::M1 => Some(0.0),
            Model::M2 => None,
            Model::M3 => Some(1.0),
            Model::Mq(q) => Some(q),
        }
    }

    pub fn name(self) -> String {
        match self {
            Model::M1 => "m1".into(),
            Model::M2 => "m2".into(),
            Model::M3 => "m3".into(),
            Model::Mq(q) => format!("mq({q})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Differencing {
    None,
    First,
    Second,
}

impl Differencing {
    pub fn name(self) -> &'static str {
        match self {
            Differencing::None => "none",
            Differencing::First => "first",
            Differencing::Second => "second",
        }
    }

    /// Number of raw observations entering one differenced row.
    pub fn width(self) -> usize {
        match self {
            Differencing::None => 1,
            Differencing::First => 2,
            Differencing::Second => 3,
        }
    }
}

/// Model, sample size, noise level and differencing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: Model,
    pub n: usize,
    pub tau: f64,
    pub differencing: Differencing,
}

impl ModelSpec {
    pub fn new(model: Model, n: usize, tau: f64, differencing: Differencing) -> Result<Self> {
        let spec = Self {
            model,
            n,
            tau,
            differencing,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The sufficient differencing of each model: first for models 1, 2 and
    /// `q`-kernels, second for model 3.
    pub fn sufficient(model: Model, n: usize, tau: f64) -> Result<Self> {
        let d = if model == Model::M3 {
            Differencing::Second
        } else {
            Differencing::First
        };
        Self::new(model, n, tau, d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidSpec("n must be positive".into()));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidSpec(format!("tau = {} must be finite and >= 0", self.tau)));
        }
        if let Model::Mq(q) = self.model {
            if !(q >= 0.0 && q.is_finite()) {
                return Err(Error::InvalidSpec(format!("q = {q} must be finite and >= 0")));
            }
        }
        if self.differencing == Differencing::Second
            && matches!(self.model, Model::M1 | Model::M2)
        {
            return Err(Error::InvalidDifferencing(
                "second differences apply to integrated kernels only".into(),
            ));
        }
        Ok(())
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self { tau, ..*self }
    }

    pub fn with_differencing(&self, differencing: Differencing) -> Self {
        Self {
            differencing,
            ..*self
        }
    }
}

/// Nonzero entries `(column, coefficient)` of row `i` (zero-based) of the
/// differencing matrix.
pub fn stencil(differencing: Differencing, i: usize) -> Vec<(usize, f64)> {
    match (differencing, i) {
        (Differencing::None, _) => vec![(i, 1.0)],
        (Differencing::First, 0) => vec![(0, 1.0)],
        (Differencing::First, _) => vec![(i - 1, -1.0), (i, 1.0)],
        (Differencing::Second, 0) => vec![(0, std::f64::consts::SQRT_2)],
        (Differencing::Second, 1) => vec![(0, -2.0), (1, 1.0)],
        (Differencing::Second, _) => vec![(i - 2, 1.0), (i - 1, -2.0), (i, 1.0)],
    }
}

/// Differencing matrix `D`: first differences with `Y₁` kept, or second
/// differences with rows `√2Ȳ₁`, `Ȳ₂ − 2Ȳ₁`, `Ȳ_i − 2Ȳ_{i−1} + Ȳ_{i−2}`.
pub fn diff_matrix(spec: &ModelSpec) -> Result<Matrix> {
    spec.validate()?;
    if spec.differencing == Differencing::None {
        return Err(Error::InvalidDifferencing("no differencing requested".into()));
    }
    let n = spec.n;
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for (j, v) in stencil(spec.differencing, i) {
            d[(i, j)] = v;
        }
    }
    Ok(d)
}

/// Noise covariance `τ²·D·Dᵗ` (or `τ²I` without differencing).
pub fn noise_cov(spec: &ModelSpec) -> SymMatrix {
    let n = spec.n;
    let t2 = spec.tau * spec.tau;
    let w = spec.differencing.width();
    let mut out = SymMatrix::zeros(n);
    for i in 0..n {
        let si = stencil(spec.differencing, i);
        for j in i..n.min(i + w) {
            let sj = stencil(spec.differencing, j);
            let mut s = 0.0;
            for &(a, x) in &si {
                for &(b, y) in &sj {
                    if a == b {
                        s += x * y;
                    }
                }
            }
            if s != 0.0 {
                out.set(i, j, t2 * s);
            }
        }
    }
    out
}

fn check_profile(profile: &VolatilityProfile) -> Result<()> {
    let (lo, _) = profile.bounds();
    if lo > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidProfile(format!("lower bound {lo} not positive")))
    }
}

fn is_small_integer(q: f64) -> Option<usize> {
    if q.fract() == 0.0 && (0.0..=8.0).contains(&q) {
        Some(q as usize)
    } else {
        None
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `∫ w(u) σ²(u) du` over grid cell `l` (covering `[l/n, (l+1)/n]`),
/// exact by the 8-point rule where `σ²` is constant on the cell.
fn cell_integral(
    profile: &VolatilityProfile,
    n: usize,
    l: usize,
    w: impl Fn(f64) -> f64,
    tol: f64,
) -> Result<f64> {
    let a = l as f64 / n as f64;
    let b = (l + 1) as f64 / n as f64;
    match profile.constant_on(a, b) {
        Some(c) => Ok(c * quadrature::gauss_legendre8(&w, a, b)),
        None => profile.weighted_integral(w, a, b, tol),
    }
}

/// Signal covariance of the undifferenced observations.
fn signal_raw(spec: &ModelSpec, profile: &VolatilityProfile) -> Result<SymMatrix> {
    let n = spec.n;
    let nf = n as f64;
    match spec.model.kernel_power() {
        None => {
            let sig: Vec<f64> = (1..=n).map(|i| profile.sigma(i as f64 / nf)).collect();
            Ok(SymMatrix::from_fn(n, |i, j| {
                sig[i] * sig[j] * (i.min(j) + 1) as f64 / nf
            }))
        }
        Some(q) => match is_small_integer(q) {
            Some(qi) => {
                // cumulative moments M_p(k) = ∫₀^{k/n} u^p σ²
                let deg = 2 * qi;
                let mut moments = vec![vec![0.0; deg + 1]; n + 1];
                for l in 0..n {
                    for p in 0..=deg {
                        let cell = cell_integral(
                            profile,
                            n,
                            l,
                            |u| u.powi(p as i32),
                            COV_TOL / nf,
                        )?;
                        moments[l + 1][p] = moments[l][p] + cell;
                    }
                }
                Ok(SymMatrix::from_fn(n, |i, j| {
                    let x = (i + 1) as f64 / nf;
                    let y = (j + 1) as f64 / nf;
                    let k = i.min(j) + 1;
                    let mut s = 0.0;
                    for a in 0..=qi {
                        for b in 0..=qi {
                            let coef = binomial(qi, a)
                                * binomial(qi, b)
                                * x.powi((qi - a) as i32)
                                * y.powi((qi - b) as i32);
                            let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                            s += sign * coef * moments[k][a + b];
                        }
                    }
                    s
                }))
            }
            None => {
                let mut out = SymMatrix::zeros(n);
                for i in 0..n {
                    for j in i..n {
                        let x = (i + 1) as f64 / nf;
                        let y = (j + 1) as f64 / nf;
                        let v = profile.weighted_integral(
                            |u| ((x - u).max(0.0) * (y - u).max(0.0)).powf(q),
                            0.0,
                            x,
                            COV_TOL,
                        )?;
                        out.set(i, j, v);
                    }
                }
                Ok(out)
            }
        },
    }
}

/// Polynomial coefficients (ascending in `v`) of the differenced kernel of
/// row `i` on cell `l`: `Σ_{r ≥ l} D_{ir} (r − l + 1 − v)^q`.
fn local_kernel(differencing: Differencing, q: usize, i: usize, l: usize) -> Vec<f64> {
    let mut coef = vec![0.0; q + 1];
    for (r, d) in stencil(differencing, i) {
        if r < l {
            continue;
        }
        let c = (r - l + 1) as f64;
        for k in 0..=q {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            coef[k] += d * sign * binomial(q, k) * c.powi((q - k) as i32);
        }
    }
    coef
}

fn poly_eval(coef: &[f64], v: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &c| acc * v + c)
}

/// Differenced signal covariance for integer kernels `q < width(D)`, where
/// each differenced kernel is supported on at most `width` cells. Integrates
/// kernel products cell by cell in local coordinates, avoiding the
/// cancellation of `D·C·Dᵗ`.
fn signal_local(spec: &ModelSpec, profile: &VolatilityProfile, q: usize) -> Result<SymMatrix> {
    let n = spec.n;
    let nf = n as f64;
    let w = spec.differencing.width();
    let scale = nf.powi(-(2 * q as i32) - 1);
    let mut out = SymMatrix::zeros(n);
    let gl = quadrature::gauss_legendre8_rule(0.0, 1.0);
    for l in 0..n {
        let rows: Vec<usize> = (l..n.min(l + w)).collect();
        let kernels: Vec<Vec<f64>> = rows
            .iter()
            .map(|&i| local_kernel(spec.differencing, q, i, l))
            .collect();
        let k = rows.len();
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a..k).map(move |b| (a, b))).collect();
        let live: Vec<bool> = kernels.iter().map(|c| c.iter().any(|&x| x != 0.0)).collect();
        let a = l as f64 / nf;
        let b = (l + 1) as f64 / nf;
        let integrals: Vec<f64> = match profile.constant_on(a, b) {
            Some(c) => pairs
                .iter()
                .map(|&(x, y)| {
                    if !live[x] || !live[y] {
                        return 0.0;
                    }
                    c * gl
                        .iter()
                        .map(|&(v, wt)| wt * poly_eval(&kernels[x], v) * poly_eval(&kernels[y], v))
                        .sum::<f64>()
                })
                .collect(),
            None => {
                let breaks: Vec<f64> = profile
                    .breaks_within(a, b)
                    .iter()
                    .map(|&t| ((t * nf) - l as f64).clamp(0.0, 1.0))
                    .collect();
                let mut acc = vec![0.0; pairs.len()];
                for seg in breaks.windows(2) {
                    if seg[1] <= seg[0] {
                        continue;
                    }
                    let part = quadrature::adaptive_vec(
                        |v, buf| {
                            let s2 = profile.eval((l as f64 + v) / nf);
                            let g: Vec<f64> = kernels.iter().map(|c| poly_eval(c, v)).collect();
                            for (slot, &(x, y)) in buf.iter_mut().zip(&pairs) {
                                *slot = g[x] * g[y] * s2;
                            }
                        },
                        pairs.len(),
                        seg[0],
                        seg[1],
                        COV_TOL * (seg[1] - seg[0]),
                    )?;
                    for (s, p) in acc.iter_mut().zip(part) {
                        *s += p;
                    }
                }
                for (s, &(x, y)) in acc.iter_mut().zip(&pairs) {
                    if !live[x] || !live[y] {
                        *s = 0.0;
                    }
                }
                acc
            }
        };
        for (&(x, y), v) in pairs.iter().zip(integrals) {
            if v != 0.0 {
                out.add_to(rows[x], rows[y], scale * v);
            }
        }
    }
    Ok(out)
}

/// First-differenced model-2 signal:
/// diagonal `(σ_i² + (i−1)(Δσ_i)²)/n`, off-diagonal
/// `Δσ_j (iσ_i − (i−1)σ_{i−1})/n` for `i < j` (one-based).
fn signal_m2_first(n: usize, profile: &VolatilityProfile) -> SymMatrix {
    let nf = n as f64;
    let sig: Vec<f64> = (0..=n)
        .map(|i| if i == 0 { 0.0 } else { profile.sigma(i as f64 / nf) })
        .collect();
    let dsig: Vec<f64> = (0..=n)
        .map(|i| if i == 0 { 0.0 } else { sig[i] - sig[i - 1] })
        .collect();
    SymMatrix::from_fn(n, |r, c| {
        let (i, j) = (r + 1, c + 1);
        if i == j {
            (sig[i] * sig[i] + (i - 1) as f64 * dsig[i] * dsig[i]) / nf
        } else if dsig[j] == 0.0 {
            0.0
        } else {
            dsig[j] * (i as f64 * sig[i] - (i - 1) as f64 * sig[i - 1]) / nf
        }
    })
}

/// `D·C·Dᵗ` through the differencing stencils.
fn conjugate_by_stencil(c: &SymMatrix, differencing: Differencing) -> SymMatrix {
    let n = c.n();
    let st: Vec<Vec<(usize, f64)>> = (0..n).map(|i| stencil(differencing, i)).collect();
    SymMatrix::from_fn(n, |i, j| {
        let mut s = 0.0;
        for &(a, x) in &st[i] {
            for &(b, y) in &st[j] {
                s += x * y * c.get(a, b);
            }
        }
        s
    })
}

/// Signal part of the covariance for the spec's differencing.
pub fn signal_cov(spec: &ModelSpec, profile: &VolatilityProfile) -> Result<SymMatrix> {
    spec.validate()?;
    check_profile(profile)?;
    if spec.differencing == Differencing::None {
        return signal_raw(spec, profile);
    }
    match spec.model.kernel_power() {
        None => Ok(signal_m2_first(spec.n, profile)),
        Some(q) => match is_small_integer(q) {
            Some(qi) if qi < spec.differencing.width() => signal_local(spec, profile, qi),
            _ => Ok(conjugate_by_stencil(
                &signal_raw(&spec.with_differencing(Differencing::None), profile)?,
                spec.differencing,
            )),
        },
    }
}

/// Covariance of the raw observations `Y_1, …, Y_n`.
pub fn cov_raw(spec: &ModelSpec, profile: &VolatilityProfile) -> Result<SymMatrix> {
    if spec.differencing != Differencing::None {
        return Err(Error::InvalidDifferencing(
            "cov_raw expects differencing = none".into(),
        ));
    }
    let s = signal_cov(spec, profile)?;
    s.add(&noise_cov(spec))
}

/// Covariance of the differenced statistic `D·Y`.
pub fn cov_differenced(spec: &ModelSpec, profile: &VolatilityProfile) -> Result<SymMatrix> {
    if spec.differencing == Differencing::None {
        return Err(Error::InvalidDifferencing(
            "cov_differenced needs first or second differencing".into(),
        ));
    }
    let s = signal_cov(spec, profile)?;
    s.add(&noise_cov(spec))
}

/// Pieces of the first-differenced model-2 covariance around the null
/// `σ ≡ 1`.
#[derive(Clone, Debug)]
pub struct Model2Decomposition {
    /// `Δσ_i Δσ_j ((i∧j) − 1)/n`.
    pub cov_r1: SymMatrix,
    /// `n⁻¹ Π E ΔΠ`, `E` strictly upper ones.
    pub cov_x1p_r1: Matrix,
    /// Diagonal of `Γ = Π − I`.
    pub gamma: Vec<f64>,
    /// `σ(i/n)`, one-based `i = 1..n`.
    pub sigma: Vec<f64>,
    /// `Δσ_i = σ(i/n) − σ((i−1)/n)`, with `σ(0) := 0`.
    pub delta_sigma: Vec<f64>,
}

impl Model2Decomposition {
    /// `Σ₀ + (2/n)Γ + (1/n)Γ² + C + Cᵗ + Cov(R₁)` with `Σ₀ = I/n + τ²A`.
    pub fn reconstruct(&self, tau: f64) -> Result<SymMatrix> {
        let n = self.gamma.len();
        let nf = n as f64;
        let a = spectral::a_matrix(n);
        let mut out = a.scale(tau * tau);
        for i in 0..n {
            let g = self.gamma[i];
            out.add_to(i, i, 1.0 / nf + 2.0 * g / nf + g * g / nf);
        }
        let c = &self.cov_x1p_r1;
        let cross = SymMatrix::from_fn(n, |i, j| c[(i, j)] + c[(j, i)]);
        out.add(&cross)?.add(&self.cov_r1)
    }
}

pub fn model2_decomposition(
    profile: &VolatilityProfile,
    n: usize,
    tau: f64,
) -> Result<Model2Decomposition> {
    ModelSpec::new(Model::M2, n, tau, Differencing::First)?;
    if n < 2 {
        return Err(Error::InvalidSpec("model-2 decomposition needs n >= 2".into()));
    }
    check_profile(profile)?;
    let nf = n as f64;
    let sigma: Vec<f64> = (1..=n).map(|i| profile.sigma(i as f64 / nf)).collect();
    let delta_sigma: Vec<f64> = (0..n)
        .map(|i| sigma[i] - if i == 0 { 0.0 } else { sigma[i - 1] })
        .collect();
    let cov_r1 = SymMatrix::from_fn(n, |i, j| {
        delta_sigma[i] * delta_sigma[j] * i.min(j) as f64 / nf
    });
    let cov_x1p_r1 = Matrix::from_fn(n, n, |i, j| {
        if j > i {
            sigma[i] * delta_sigma[j] / nf
        } else {
            0.0
        }
    });
    let gamma = sigma.iter().map(|s| s - 1.0).collect();
    Ok(Model2Decomposition {
        cov_r1,
        cov_x1p_r1,
        gamma,
        sigma,
        delta_sigma,
    })
}

/// `V₂ = (noise part of the second-differenced model-3 covariance)/τ² − A²`.
pub fn extract_v2(n: usize, tau: f64) -> Result<SymMatrix> {
    if n < 4 {
        return Err(Error::InvalidSpec(format!("extract_v2 needs n >= 4, got {n}")));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidSpec(format!("extract_v2 needs tau > 0, got {tau}")));
    }
    let spec = ModelSpec::new(Model::M3, n, tau, Differencing::Second)?;
    let one = VolatilityProfile::constant(1.0)?;
    let full = cov_differenced(&spec, &one)?;
    let signal = cov_differenced(&spec.with_tau(0.0), &one)?;
    let noise = full.sub(&signal)?.scale(1.0 / (tau * tau));
    let a = spectral::a_matrix(n);
    let a2 = a.matmul(a.as_matrix())?.symmetric_part()?;
    noise.sub(&a2)
}

/// Checks of the second-differenced model-3 covariance against its
/// structured description.
#[derive(Clone, Debug, Serialize)]
pub struct Model3StructureReport {
    pub n: usize,
    /// Largest relative deviation of interior diagonal entries from `2/(3n³)`.
    pub interior_diag_rel_err: f64,
    /// Largest relative deviation of adjacent off-diagonals from `1/(6n³)`.
    pub offdiag_rel_err: f64,
    /// Relative deviation of entry (1,2) from `√2/(6n³)`.
    pub entry_12_rel_err: f64,
    /// Largest absolute entry beyond the first off-diagonal, scaled by `n³`.
    pub beyond_band_max: f64,
    /// Largest relative deviation from `I/n³ − A/(6n³) + (√2−1)V₁/(6n³)`
    /// over entries with `i, j ≥ 2`.
    pub structured_rel_err: f64,
    /// Entry (1,1) times `n³` from quadrature.
    pub entry_11_quadrature: f64,
    /// Entry (1,1) times `n³` from the structured display, `5/6`.
    pub entry_11_structured: f64,
    /// `(V₂)₁₁, (V₂)₁₂, (V₂)₁₃, (V₂)₂₂, (V₂)₂₃, (V₂)₃₃`.
    pub v2_leading: [f64; 6],
    /// Entries of `V₂` outside the leading 3×3 block above `1e-12`,
    /// one-based.
    pub v2_outside_block: Vec<(usize, usize, f64)>,
    pub v2_confined: bool,
    /// `|(V₂)₁₂ − (3 − 2√2)|`.
    pub v2_12_err: f64,
}

pub fn model3_structure_report(n: usize, tau: f64) -> Result<Model3StructureReport> {
    if n < 4 {
        return Err(Error::InvalidSpec(format!("structure report needs n >= 4, got {n}")));
    }
    let spec = ModelSpec::new(Model::M3, n, 0.0, Differencing::Second)?;
    let one = VolatilityProfile::constant(1.0)?;
    let s = signal_cov(&spec, &one)?.scale((n as f64).powi(3));
    let rel = |v: f64, e: f64| ((v - e) / e).abs();
    let mut interior_diag_rel_err: f64 = 0.0;
    let mut offdiag_rel_err: f64 = 0.0;
    let mut beyond_band_max: f64 = 0.0;
    let mut structured_rel_err: f64 = 0.0;
    let a = spectral::a_matrix(n);
    for i in 0..n {
        if i >= 1 {
            interior_diag_rel_err = interior_diag_rel_err.max(rel(s.get(i, i), 2.0 / 3.0));
        }
        if i >= 1 && i + 1 < n {
            offdiag_rel_err = offdiag_rel_err.max(rel(s.get(i, i + 1), 1.0 / 6.0));
        }
        for j in (i + 2)..n {
            beyond_band_max = beyond_band_max.max(s.get(i, j).abs());
        }
        if i >= 1 {
            for j in i..n.min(i + 2) {
                let e = if i == j { 1.0 } else { 0.0 } - a.get(i, j) / 6.0;
                structured_rel_err = structured_rel_err.max(rel(s.get(i, j), e));
            }
        }
    }
    let v2 = extract_v2(n, if tau > 0.0 { tau } else { 1.0 })?;
    let mut v2_outside_block = Vec::new();
    for i in 0..n {
        for j in i..n {
            if (i >= 3 || j >= 3) && v2.get(i, j).abs() > 1e-12 {
                v2_outside_block.push((i + 1, j + 1, v2.get(i, j)));
            }
        }
    }
    let v12 = v2.get(0, 1);
    Ok(Model3StructureReport {
        n,
        interior_diag_rel_err,
        offdiag_rel_err,
        entry_12_rel_err: rel(s.get(0, 1), std::f64::consts::SQRT_2 / 6.0),
        beyond_band_max,
        structured_rel_err,
        entry_11_quadrature: s.get(0, 0),
        entry_11_structured: 5.0 / 6.0,
        v2_leading: [
            v2.get(0, 0),
            v12,
            v2.get(0, 2),
            v2.get(1, 1),
            v2.get(1, 2),
            v2.get(2, 2),
        ],
        v2_confined: v2_outside_block.is_empty(),
        v2_outside_block,
        v2_12_err: (v12 - (3.0 - 2.0 * std::f64::consts::SQRT_2)).abs(),
    })
}

/// One row of a null-inverse Frobenius sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrobeniusRow {
    pub n: usize,
    /// `‖Σ₀⁻¹‖_F²` at `σ² ≡ 1`.
    pub inverse_frobenius_sq: f64,
    /// `‖Σ₀⁻¹‖_F² / n^{exponent}`.
    pub ratio: f64,
}

/// Growth exponent of `‖Σ₀⁻¹‖_F²` for the sufficiently differenced null:
/// `5/2` for models 1 and 2, `25/4` for model 3.
pub fn inverse_frobenius_exponent(model: Model) -> Result<f64> {
    match model {
        Model::M1 | Model::M2 => Ok(2.5),
        Model::M3 => Ok(6.25),
        Model::Mq(_) => Err(Error::Unsupported(
            "no inverse-Frobenius exponent for general q".into(),
        )),
    }
}

/// `‖Σ₀⁻¹‖_F²` and its normalised ratio for each `n`.
pub fn inverse_frobenius_sweep(model: Model, tau: f64, ns: &[usize]) -> Result<Vec<FrobeniusRow>> {
    let e = inverse_frobenius_exponent(model)?;
    let one = VolatilityProfile::constant(1.0)?;
    ns.iter()
        .map(|&n| {
            let s0 = cov_differenced(&ModelSpec::sufficient(model, n, tau)?, &one)?;
            let f = crate::linalg::Cholesky::factor(&s0)?.inverse_frobenius_sq();
            Ok(FrobeniusRow {
                n,
                inverse_frobenius_sq: f,
                ratio: f / (n as f64).powf(e),
            })
        })
        .collect()
}

/// Writes a symmetric matrix as headerless row-major CSV.
pub fn write_matrix_csv<W: Write>(m: &SymMatrix, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for i in 0..m.n() {
        w.write_record(m.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// JSON header describing an exported covariance.
pub fn export_header(spec: &ModelSpec, profile: &VolatilityProfile) -> Value {
    json!({
        "model": spec.model.name(),
        "n": spec.n,
        "tau": spec.tau,
        "differencing": spec.differencing.name(),
        "profile": profile.descriptor(),
    })
}
