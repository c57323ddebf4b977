//! Bump-kernel hypothesis families for the lower-bound construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::profile::{Bump, VolatilityProfile};
use crate::quadrature;

/// Smallest code length for which the Varshamov–Gilbert guarantee holds.
pub const MIN_BUMPS: usize = 8;
/// Safety factor applied to the grid-estimated seminorm.
pub const KERNEL_SAFETY: f64 = 0.99;
/// Largest code length handled by the bit-packed search.
pub const MAX_CODE_LENGTH: usize = 128;
/// Grid used by [`kernel_constant`] for fractional exponents.
pub const SEMINORM_GRID: usize = 2001;
/// Attempt budgets of the random greedy search, tried in order.
const RANDOM_BUDGETS: [usize; 2] = [10_000, 1_000_000];

/// Unnormalised bump `g(u) = exp(−1/(1 − 4u²))` on `|u| < 1/2`, zero outside.
pub fn bump(u: f64) -> f64 {
    let s = 1.0 - 4.0 * u * u;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// Derivative of order `p ∈ {0, 1, 2}` of [`bump`].
pub fn bump_derivative(p: usize, u: f64) -> f64 {
    let s = 1.0 - 4.0 * u * u;
    if s <= 0.0 {
        return 0.0;
    }
    let g = (-1.0 / s).exp();
    if g == 0.0 {
        return 0.0;
    }
    let f1 = -8.0 * u / (s * s);
    match p {
        0 => g,
        1 => g * f1,
        2 => {
            let f2 = -8.0 / (s * s) - 128.0 * u * u / (s * s * s);
            g * (f1 * f1 + f2)
        }
        _ => f64::NAN,
    }
}

/// Split `α = p + β` with integer `p = ⌈α⌉ − 1` and `β ∈ (0, 1]`, so that
/// `α = 1` is the Lipschitz class.
pub fn holder_order(alpha: f64) -> (usize, f64) {
    let p = (alpha.ceil() - 1.0).max(0.0) as usize;
    (p, alpha - p as f64)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.5 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::UnsupportedAlpha(alpha))
    }
}

/// Largest `|f(x) − f(y)| / |x − y|^β` over pairs of an equispaced grid on
/// `[lo, hi]`.
pub fn grid_seminorm(f: impl Fn(f64) -> f64, beta: f64, lo: f64, hi: f64, grid_size: usize) -> f64 {
    let n = grid_size.max(2);
    let step = (hi - lo) / (n - 1) as f64;
    let vals: Vec<f64> = (0..n).map(|k| f(lo + k as f64 * step)).collect();
    let mut best: f64 = 0.0;
    if beta == 1.0 {
        for w in vals.windows(2) {
            best = best.max((w[1] - w[0]).abs() / step);
        }
        return best;
    }
    let dist: Vec<f64> = (0..n).map(|k| (k as f64 * step).powf(beta)).collect();
    for i in 0..n {
        let vi = vals[i];
        for j in (i + 1)..n {
            let r = (vals[j] - vi).abs() / dist[j - i];
            if r > best {
                best = r;
            }
        }
    }
    best
}

fn sup_abs(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 20_001;
    let step = (hi - lo) / (n - 1) as f64;
    let (mut arg, mut best) = (lo, 0.0);
    for k in 0..n {
        let x = lo + k as f64 * step;
        let v = f(x).abs();
        if v > best {
            best = v;
            arg = x;
        }
    }
    // golden-section refinement around the grid maximiser
    let (mut a, mut b) = ((arg - step).max(lo), (arg + step).min(hi));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c).abs() > f(d).abs() {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(f(0.5 * (a + b)).abs())
}

/// Normalisation `a` making `K = a·g` a member of `C(α, 1/2)`.
///
/// `a = 0.99 · (1/2) / S` where `S` is the order-`α` seminorm of `g`: the
/// sup of the analytic `(p+1)`-th derivative when `β = 1`, otherwise a grid
/// pair search over the analytic `p`-th derivative.
pub fn kernel_constant(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let (p, beta) = holder_order(alpha);
    let s = if beta == 1.0 {
        sup_abs(|u| bump_derivative(p + 1, u), -0.5, 0.5)
    } else {
        grid_seminorm(|u| bump_derivative(p, u), beta, -0.5, 0.5, SEMINORM_GRID)
    };
    Ok(KERNEL_SAFETY * 0.5 / s)
}

/// `K(u) = a·exp(−1/(1 − (2u)²))` on `[−1/2, 1/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpKernel {
    alpha: f64,
    a: f64,
    l2_sq: f64,
}

impl BumpKernel {
    /// Kernel with `a` from [`kernel_constant`].
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_constant(alpha, kernel_constant(alpha)?)
    }

    /// Kernel with a caller-chosen normalisation.
    pub fn with_constant(alpha: f64, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidSpec(format!("kernel constant {a} must be positive")));
        }
        let g2 = quadrature::adaptive(|u| bump(u).powi(2), -0.5, 0.5, 1e-16)?;
        Ok(Self {
            alpha,
            a,
            l2_sq: a * a * g2,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.a * bump(u)
    }

    pub fn derivative(&self, p: usize, u: f64) -> f64 {
        self.a * bump_derivative(p, u)
    }

    /// `‖K‖_∞ = a/e`.
    pub fn sup_norm(&self) -> f64 {
        self.a * (-1f64).exp()
    }

    /// `‖K‖₂²`.
    pub fn l2_sq(&self) -> f64 {
        self.l2_sq
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderReport {
    pub p: usize,
    pub beta: f64,
    pub seminorm: f64,
    pub min: f64,
    pub max: f64,
    pub pass: bool,
}

/// Grid membership test for `C(α, L)` on `[0, 1]` with optional bounds
/// `l ≤ f ≤ u`. `deriv` must return the `p`-th derivative.
///
/// A grid check is necessary, not sufficient, for membership.
pub fn holder_report(
    f: impl Fn(f64) -> f64,
    deriv: impl Fn(f64) -> f64,
    alpha: f64,
    l_const: f64,
    grid_size: usize,
    bounds: Option<(f64, f64)>,
) -> HolderReport {
    let (p, beta) = holder_order(alpha);
    let seminorm = grid_seminorm(&deriv, beta, 0.0, 1.0, grid_size);
    let n = grid_size.max(2);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..n {
        let v = f(k as f64 / (n - 1) as f64);
        min = min.min(v);
        max = max.max(v);
    }
    let mut pass = seminorm <= l_const * (1.0 + 1e-6);
    if let Some((lo, hi)) = bounds {
        pass &= min >= lo && max <= hi;
    }
    HolderReport {
        p,
        beta,
        seminorm,
        min,
        max,
        pass,
    }
}

/// [`holder_report`] with derivatives by central differences at step `1e-5`.
pub fn holder_check(f: impl Fn(f64) -> f64, alpha: f64, l_const: f64, grid_size: usize) -> bool {
    let (p, _) = holder_order(alpha);
    holder_report(
        &f,
        |t| crate::profile::central_difference(&f, p, t),
        alpha,
        l_const,
        grid_size,
        None,
    )
    .pass
}

/// Which bump-count exponent the family uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelClass {
    /// `m = ⌊c/2 · n^{1/(4α+2)} + 1⌋`.
    M1M2,
    /// `m = ⌊c/2 · n^{1/(8α+4)} + 1⌋`.
    M3,
}

impl ModelClass {
    pub fn bandwidth_exponent(self, alpha: f64) -> f64 {
        match self {
            ModelClass::M1M2 => 1.0 / (4.0 * alpha + 2.0),
            ModelClass::M3 => 1.0 / (8.0 * alpha + 4.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelClass::M1M2 => "M1M2",
            ModelClass::M3 => "M3",
        }
    }
}

/// Bump count `m`. A tiny guard keeps exact powers such as `4096^{1/6} = 4`
/// from flooring one below.
pub fn bump_count(n: usize, alpha: f64, c: f64, class: ModelClass) -> usize {
    let x = 0.5 * c * (n as f64).powf(class.bandwidth_exponent(alpha)) + 1.0;
    (x + 1e-9 * x.max(1.0)).floor() as usize
}

/// Smallest `c` giving exactly `m` bumps at size `n`.
pub fn c_for_bumps(m: usize, n: usize, alpha: f64, class: ModelClass) -> f64 {
    2.0 * (m as f64 - 1.0) / (n as f64).powf(class.bandwidth_exponent(alpha))
}

/// Bump-perturbation hypotheses `σ²_ω = 1 + Σ ω_k φ_k`.
#[derive(Clone, Debug)]
pub struct HypothesisFamily {
    pub n: usize,
    pub alpha: f64,
    pub l_const: f64,
    pub c: f64,
    pub model_class: ModelClass,
    pub m: usize,
    pub h: f64,
    pub centers: Vec<f64>,
    /// `codewords[0]` is all zeros.
    pub codewords: Vec<Vec<u8>>,
    pub kernel: BumpKernel,
    pub seed: u64,
}

/// Builds the family with `h = 1/(2m)` and centres `t_k = h(k − 1/2) + 1/4`.
pub fn build_family(
    n: usize,
    alpha: f64,
    l_const: f64,
    c: f64,
    model_class: ModelClass,
    seed: u64,
) -> Result<HypothesisFamily> {
    if n < 2 {
        return Err(Error::InvalidSpec(format!("n = {n} must be at least 2")));
    }
    if !(l_const > 0.0) || !(c > 0.0) {
        return Err(Error::InvalidSpec("L and c must be positive".into()));
    }
    let kernel = BumpKernel::new(alpha)?;
    let m = bump_count(n, alpha, c, model_class);
    if m < MIN_BUMPS {
        return Err(Error::TooFewBumps { m });
    }
    let h = 1.0 / (2.0 * m as f64);
    let centers = (1..=m).map(|k| h * (k as f64 - 0.5) + 0.25).collect();
    let codewords = vg_code(m, seed)?;
    Ok(HypothesisFamily {
        n,
        alpha,
        l_const,
        c,
        model_class,
        m,
        h,
        centers,
        codewords,
        kernel,
        seed,
    })
}

impl HypothesisFamily {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Bump amplitude `L·hᵅ`.
    pub fn amplitude(&self) -> f64 {
        self.l_const * self.h.powf(self.alpha)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            })
        }
    }

    /// `σ²_{ω_i}` as a profile.
    pub fn profile(&self, i: usize) -> Result<VolatilityProfile> {
        self.check_index(i)?;
        self.profile_for_word(&self.codewords[i])
    }

    pub fn profile_for_word(&self, word: &[u8]) -> Result<VolatilityProfile> {
        let amp = self.amplitude();
        let bumps = self
            .centers
            .iter()
            .zip(word)
            .map(|(&center, &w)| Bump {
                center,
                width: self.h,
                height: if w != 0 { amp } else { 0.0 },
            })
            .collect();
        VolatilityProfile::bump_family(1.0, self.kernel.clone(), bumps)
    }

    pub fn hamming(&self, i: usize, j: usize) -> Result<usize> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(hamming(&self.codewords[i], &self.codewords[j]))
    }

    /// `L² h^{2α+1} ‖K‖₂² ρ(ω_i, ω_j)`.
    pub fn separation_closed_form(&self, i: usize, j: usize) -> Result<f64> {
        let rho = self.hamming(i, j)? as f64;
        Ok(self.l_const.powi(2) * self.h.powf(2.0 * self.alpha + 1.0) * self.kernel.l2_sq() * rho)
    }

    /// Upper bound `u` on every `σ²_ω`.
    pub fn upper_bound(&self) -> f64 {
        1.0 + self.amplitude() * self.kernel.sup_norm()
    }

    pub fn descriptor(&self) -> Value {
        json!({
            "n": self.n,
            "alpha": self.alpha,
            "L": self.l_const,
            "c": self.c,
            "model_class": self.model_class.name(),
            "m": self.m,
            "h_n": self.h,
            "centers": self.centers,
            "codewords": self.codewords.iter().map(|w| bitstring(w)).collect::<Vec<_>>(),
            "a": self.kernel.a(),
            "K_l2_sq": self.kernel.l2_sq(),
            "seed": self.seed,
        })
    }
}

pub fn bitstring(word: &[u8]) -> String {
    word.iter().map(|&b| if b != 0 { '1' } else { '0' }).collect()
}

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| (**x != 0) != (**y != 0)).count()
}

/// `∫₀¹ (σ²_{ω_i} − σ²_{ω_j})²` by adaptive quadrature over each bump
/// support where the words differ. The integrand is the bump itself, so no
/// cancellation against the baseline enters.
pub fn l2_separation(family: &HypothesisFamily, i: usize, j: usize) -> Result<f64> {
    family.check_index(i)?;
    family.check_index(j)?;
    let amp = family.amplitude();
    let h = family.h;
    let tol = 1e-14 * amp * amp * h * family.kernel.l2_sq();
    let mut total = 0.0;
    for (k, &center) in family.centers.iter().enumerate() {
        if (family.codewords[i][k] != 0) == (family.codewords[j][k] != 0) {
            continue;
        }
        let f = |t: f64| (amp * family.kernel.eval((t - center) / h)).powi(2);
        total += quadrature::adaptive(f, center - 0.5 * h, center + 0.5 * h, tol)?;
    }
    Ok(total)
}

/// Binary code containing the zero word plus `⌈2^{m/8}⌉` further words at
/// pairwise Hamming distance `≥ ⌈m/8⌉`.
///
/// Lexicographic greedy for `m ≤ 24`, seeded random greedy beyond; both
/// guarantees are re-checked on the result.
pub fn vg_code(m: usize, seed: u64) -> Result<Vec<Vec<u8>>> {
    if m < MIN_BUMPS {
        return Err(Error::TooFewBumps { m });
    }
    if m > MAX_CODE_LENGTH {
        return Err(Error::ConstructionFailure {
            m,
            reason: format!("code length above {MAX_CODE_LENGTH}"),
        });
    }
    let dist = m.div_ceil(8) as u32;
    let target = 2f64.powf(m as f64 / 8.0).ceil() as usize;
    let far = |words: &[u128], w: u128| words.iter().all(|&v| (v ^ w).count_ones() >= dist);
    let mut words: Vec<u128> = vec![0];
    if m <= 24 {
        for w in 1u128..(1u128 << m) {
            if words.len() > target {
                break;
            }
            if far(&words, w) {
                words.push(w);
            }
        }
    } else {
        let mask = if m == 128 { u128::MAX } else { (1u128 << m) - 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for budget in RANDOM_BUDGETS {
            for _ in 0..budget {
                if words.len() > target {
                    break;
                }
                let w = rng.gen::<u128>() & mask;
                if far(&words, w) {
                    words.push(w);
                }
            }
            if words.len() > target {
                break;
            }
        }
    }
    if words.len() <= target {
        return Err(Error::ConstructionFailure {
            m,
            reason: format!("found {} of {} words", words.len() - 1, target),
        });
    }
    for i in 0..words.len() {
        for j in (i + 1)..words.len() {
            if (words[i] ^ words[j]).count_ones() < dist {
                return Err(Error::ConstructionFailure {
                    m,
                    reason: format!("words {i} and {j} closer than {dist}"),
                });
            }
        }
    }
    Ok(words
        .into_iter()
        .map(|w| (0..m).map(|k| ((w >> k) & 1) as u8).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_shape() {
        assert_eq!(bump(0.5), 0.0);
        assert_eq!(bump(-0.7), 0.0);
        assert!((bump(0.0) - (-1f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        for &u in &[-0.3, -0.1, 0.05, 0.2, 0.4] {
            let h = 1e-6;
            let d1 = (bump(u + h) - bump(u - h)) / (2.0 * h);
            assert!((d1 - bump_derivative(1, u)).abs() < 1e-8);
            let d2 = (bump_derivative(1, u + h) - bump_derivative(1, u - h)) / (2.0 * h);
            assert!((d2 - bump_derivative(2, u)).abs() < 1e-6);
        }
    }

    #[test]
    fn holder_order_convention() {
        assert_eq!(holder_order(1.0), (0, 1.0));
        assert_eq!(holder_order(0.6).0, 0);
        assert_eq!(holder_order(1.5), (1, 0.5));
        assert_eq!(holder_order(2.0), (1, 1.0));
    }

    #[test]
    fn unsupported_alpha() {
        assert!(matches!(kernel_constant(0.5), Err(Error::UnsupportedAlpha(_))));
        assert!(matches!(kernel_constant(2.5), Err(Error::UnsupportedAlpha(_))));
    }

    #[test]
    fn bump_count_examples() {
        assert_eq!(bump_count(4096, 1.0, 2.0, ModelClass::M1M2), 5);
        assert_eq!(bump_count(1 << 24, 1.0, 2.0, ModelClass::M1M2), 17);
    }

    #[test]
    fn too_few_bumps() {
        assert!(matches!(
            build_family(4096, 1.0, 1.0, 2.0, ModelClass::M1M2, 1),
            Err(Error::TooFewBumps { m: 5 })
        ));
    }

    #[test]
    fn code_m8_threshold_one() {
        let words = vg_code(8, 0).unwrap();
        assert!(words.len() >= 3);
        assert!(words[0].iter().all(|&b| b == 0));
    }
}
