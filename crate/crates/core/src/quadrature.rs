//! Fixed and adaptive Gauss rules on finite intervals.

use crate::error::{Error, Result};

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

const GK15_NODES: [f64; 8] = [
    0.991_455_371_120_812_639,
    0.949_107_912_342_758_525,
    0.864_864_423_359_769_073,
    0.741_531_185_599_394_440,
    0.586_087_235_467_691_130,
    0.405_845_151_377_397_167,
    0.207_784_955_007_898_468,
    0.0,
];
const GK15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_553,
    0.104_790_010_322_250_184,
    0.140_653_259_715_525_919,
    0.169_004_726_639_267_903,
    0.190_350_578_064_785_410,
    0.204_432_940_075_298_892,
    0.209_482_141_084_727_828,
];
// Gauss weights for the odd Kronrod nodes 1, 3, 5, 7
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_693,
    0.279_705_391_489_276_668,
    0.381_830_050_505_118_945,
    0.417_959_183_673_469_388,
];

/// Maximum bisection depth of the adaptive rules.
pub const MAX_DEPTH: usize = 48;

/// Panel budget of one adaptive call; exceeding it is a failure.
pub const MAX_PANELS: usize = 1 << 20;

/// Panels at the depth limit or at floating-point resolution are accepted
/// as they are; their summed error estimates must stay within the overall
/// tolerance, so the total error is at most twice `abs_tol`.
#[derive(Default)]
struct Forced {
    err: f64,
}

impl Forced {
    fn absorb(&mut self, lo: f64, hi: f64, err: f64, abs_tol: f64) -> Result<()> {
        self.err += err;
        if self.err > abs_tol {
            return Err(Error::QuadratureFailure {
                a: lo,
                b: hi,
                estimate: self.err,
            });
        }
        Ok(())
    }
}

fn over_budget(panels: usize, lo: f64, hi: f64, err: f64) -> Result<()> {
    if panels > MAX_PANELS {
        return Err(Error::QuadratureFailure {
            a: lo,
            b: hi,
            estimate: err,
        });
    }
    Ok(())
}

fn unsplittable(lo: f64, hi: f64, depth: usize) -> bool {
    depth >= MAX_DEPTH || (hi - lo).abs() <= 64.0 * f64::EPSILON * lo.abs().max(hi.abs())
}

/// 8-point Gauss–Legendre rule; exact for polynomials of degree ≤ 15.
#[inline]
pub fn gauss_legendre8(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..4 {
        let dx = h * GL8_NODES[k];
        s += GL8_WEIGHTS[k] * (f(c - dx) + f(c + dx));
    }
    s * h
}

/// Nodes and weights of the 8-point rule mapped to `[a, b]`.
pub fn gauss_legendre8_rule(a: f64, b: f64) -> [(f64, f64); 8] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 8];
    for k in 0..4 {
        out[2 * k] = (c - h * GL8_NODES[k], h * GL8_WEIGHTS[k]);
        out[2 * k + 1] = (c + h * GL8_NODES[k], h * GL8_WEIGHTS[k]);
    }
    out
}

/// One Gauss–Kronrod 7-15 panel: `(kronrod, |kronrod − gauss|)`.
pub fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK15_WEIGHTS[7] * fc;
    let mut g = G7_WEIGHTS[3] * fc;
    for j in 0..7 {
        let dx = h * GK15_NODES[j];
        let pair = f(c - dx) + f(c + dx);
        k += GK15_WEIGHTS[j] * pair;
        if j % 2 == 1 {
            g += G7_WEIGHTS[j / 2] * pair;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature to absolute tolerance `abs_tol`.
///
/// Each panel must meet its length-proportional share of the tolerance.
/// Panels whose error is below rounding of their own value are accepted.
/// Integrable endpoint singularities end in unsplittable panels, which are
/// accepted while their summed error stays below `abs_tol`.
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let width = (b - a).abs();
    let mut total = 0.0;
    let mut forced = Forced::default();
    let mut stack = vec![(a, b, 0usize)];
    let mut panels = 0usize;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        panels += 1;
        over_budget(panels, lo, hi, err)?;
        let share = abs_tol * (hi - lo).abs() / width;
        if err <= share || err <= 50.0 * f64::EPSILON * val.abs() {
            total += val;
            continue;
        }
        if unsplittable(lo, hi, depth) {
            forced.absorb(lo, hi, err, abs_tol)?;
            total += val;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        stack.push((mid, hi, depth + 1));
        stack.push((lo, mid, depth + 1));
    }
    Ok(total)
}

/// Integrates over consecutive breakpoints, splitting the tolerance by
/// length. `breaks` must be sorted.
pub fn adaptive_pieces(f: impl Fn(f64) -> f64, breaks: &[f64], abs_tol: f64) -> Result<f64> {
    let (Some(&lo), Some(&hi)) = (breaks.first(), breaks.last()) else {
        return Ok(0.0);
    };
    let width = hi - lo;
    let mut s = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            s += adaptive(&f, w[0], w[1], abs_tol * (w[1] - w[0]) / width)?;
        }
    }
    Ok(s)
}

/// Vector-valued [`adaptive`]: integrates every component of
/// `f(x, out)` simultaneously, judging error by the worst component.
pub fn adaptive_vec(
    f: impl Fn(f64, &mut [f64]),
    dim: usize,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<Vec<f64>> {
    let mut total = vec![0.0; dim];
    if a == b {
        return Ok(total);
    }
    let width = (b - a).abs();
    let mut forced = Forced::default();
    let mut fx = vec![0.0; dim];
    let mut gx = vec![0.0; dim];
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut stack = vec![(a, b, 0usize)];
    let mut panels = 0usize;
    while let Some((lo, hi, depth)) = stack.pop() {
        panels += 1;
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        f(c, &mut fx);
        for d in 0..dim {
            kron[d] = GK15_WEIGHTS[7] * fx[d];
            gauss[d] = G7_WEIGHTS[3] * fx[d];
        }
        for j in 0..7 {
            let dx = h * GK15_NODES[j];
            f(c - dx, &mut fx);
            f(c + dx, &mut gx);
            for d in 0..dim {
                let pair = fx[d] + gx[d];
                kron[d] += GK15_WEIGHTS[j] * pair;
                if j % 2 == 1 {
                    gauss[d] += G7_WEIGHTS[j / 2] * pair;
                }
            }
        }
        let mut err: f64 = 0.0;
        let mut mag: f64 = 0.0;
        for d in 0..dim {
            err = err.max(((kron[d] - gauss[d]) * h).abs());
            mag = mag.max((kron[d] * h).abs());
        }
        over_budget(panels, lo, hi, err)?;
        let share = abs_tol * (hi - lo).abs() / width;
        let accept = err <= share || err <= 50.0 * f64::EPSILON * mag;
        if !accept && unsplittable(lo, hi, depth) {
            forced.absorb(lo, hi, err, abs_tol)?;
        }
        if accept || unsplittable(lo, hi, depth) {
            for d in 0..dim {
                total[d] += kron[d] * h;
            }
            continue;
        }
        stack.push((c, hi, depth + 1));
        stack.push((lo, c, depth + 1));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl8_exact_on_degree_15() {
        let v = gauss_legendre8(|x| x.powi(15) + x.powi(4), 0.0, 1.0);
        assert!((v - (1.0 / 16.0 + 0.2)).abs() < 1e-15);
        let s: f64 = gauss_legendre8_rule(0.0, 2.0).iter().map(|p| p.1).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_kink() {
        let v = adaptive(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn adaptive_smooth_bump() {
        let v = adaptive(|x: f64| x.exp(), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn vector_rule_matches_scalar() {
        let v = adaptive_vec(
            |x, out| {
                out[0] = x.sin();
                out[1] = (3.0 * x).cos();
            },
            2,
            0.0,
            2.0,
            1e-13,
        )
        .unwrap();
        assert!((v[0] - (1.0 - 2f64.cos())).abs() < 1e-13);
        assert!((v[1] - 6f64.sin() / 3.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_singular_endpoint() {
        let v = adaptive(|x: f64| (1.0 - x).max(0.0).sqrt(), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 2e-13);
    }

    #[test]
    fn adaptive_reports_failure() {
        let r = adaptive(|x: f64| if x > 0.3 { 1e300 } else { 0.0 }, 0.0, 1.0, 1e-300);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
