//! Volatility profiles `σ²(·)` on `[0, 1]`.

use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::hypothesis::BumpKernel;
use crate::quadrature;

/// Grid used to probe positivity and bounds.
const PROBE_POINTS: usize = 1025;

/// One bump `height · K((t − center)/width)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub height: f64,
}

impl Bump {
    pub fn support(&self) -> (f64, f64) {
        (self.center - 0.5 * self.width, self.center + 0.5 * self.width)
    }
}

#[derive(Clone)]
pub enum ProfileKind {
    Constant(f64),
    /// `values[k]` on `[breaks[k], breaks[k+1])`; `breaks` runs from 0 to 1.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    /// `base + Σ bumps`, bumps pairwise disjoint.
    BumpFamily {
        base: f64,
        kernel: BumpKernel,
        bumps: Vec<Bump>,
    },
    /// Arbitrary smooth function; `breaks` mark kinks for quadrature.
    Callable {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        breaks: Vec<f64>,
        label: String,
    },
}

/// How `σ²` behaves on one piece of the partition of `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PieceShape {
    Constant(f64),
    Smooth,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub a: f64,
    pub b: f64,
    pub shape: PieceShape,
}

/// The function `σ²(·)` with bounds `0 < l ≤ σ² ≤ u`.
#[derive(Clone)]
pub struct VolatilityProfile {
    kind: ProfileKind,
    lower: f64,
    upper: f64,
}

impl fmt::Debug for VolatilityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VolatilityProfile({})", self.descriptor())
    }
}

impl VolatilityProfile {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidProfile(format!("constant value {value} must be positive")));
        }
        Ok(Self {
            kind: ProfileKind::Constant(value),
            lower: value,
            upper: value,
        })
    }

    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::InvalidProfile(
                "piecewise profile needs one more break than values".into(),
            ));
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 {
            return Err(Error::InvalidProfile("breaks must run from 0 to 1".into()));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidProfile("breaks must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidProfile("piece values must be positive".into()));
        }
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = values.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            kind: ProfileKind::PiecewiseConstant { breaks, values },
            lower,
            upper,
        })
    }

    /// `base + Σ_k height_k · K((t − center_k)/width_k)`. Bumps with zero
    /// height are dropped so that untouched regions stay exactly constant.
    pub fn bump_family(base: f64, kernel: BumpKernel, bumps: Vec<Bump>) -> Result<Self> {
        if !(base > 0.0 && base.is_finite()) {
            return Err(Error::InvalidProfile(format!("base {base} must be positive")));
        }
        let mut bumps: Vec<Bump> = bumps.into_iter().filter(|b| b.height != 0.0).collect();
        bumps.sort_by(|x, y| x.center.total_cmp(&y.center));
        for b in &bumps {
            let (lo, hi) = b.support();
            if !(b.width > 0.0) || lo < 0.0 || hi > 1.0 || !b.height.is_finite() {
                return Err(Error::InvalidProfile(format!("bump {b:?} leaves [0, 1]")));
            }
        }
        for w in bumps.windows(2) {
            // adjacent supports may touch up to rounding
            let slack = 1e-12 * w[0].width.max(w[1].width);
            if w[0].support().1 > w[1].support().0 + slack {
                return Err(Error::InvalidProfile("bump supports overlap".into()));
            }
        }
        let peak = kernel.sup_norm();
        let lower = bumps
            .iter()
            .map(|b| base + b.height.min(0.0) * peak)
            .fold(base, f64::min);
        let upper = bumps
            .iter()
            .map(|b| base + b.height.max(0.0) * peak)
            .fold(base, f64::max);
        if !(lower > 0.0) {
            return Err(Error::InvalidProfile(format!("bump profile dips to {lower}")));
        }
        Ok(Self {
            kind: ProfileKind::BumpFamily {
                base,
                kernel,
                bumps,
            },
            lower,
            upper,
        })
    }

    /// Wraps a callable; bounds are estimated on a probe grid and positivity
    /// is enforced there.
    pub fn callable(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        breaks: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let f: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(f);
        let mut breaks: Vec<f64> = breaks
            .into_iter()
            .filter(|b| *b > 0.0 && *b < 1.0)
            .collect();
        breaks.push(0.0);
        breaks.push(1.0);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut lower = f64::INFINITY;
        let mut upper: f64 = 0.0;
        for k in 0..PROBE_POINTS {
            let t = k as f64 / (PROBE_POINTS - 1) as f64;
            let v = f(t);
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidProfile(format!("sigma^2({t}) = {v}")));
            }
            lower = lower.min(v);
            upper = upper.max(v);
        }
        Ok(Self {
            kind: ProfileKind::Callable {
                f,
                breaks,
                label: label.into(),
            },
            lower,
            upper,
        })
    }

    /// `σ²` for a seeded piecewise-linear `σ ≥ 1` with at most 12 pieces
    /// and slopes bounded by `l_const`.
    pub fn random_lipschitz(rng: &mut impl rand::Rng, l_const: f64) -> Result<Self> {
        if !(l_const > 0.0) {
            return Err(Error::InvalidSpec(format!("L = {l_const} must be positive")));
        }
        let k = rng.gen_range(1..=12usize);
        let mut knots = vec![0.0f64];
        for _ in 0..k {
            let step = rng.gen_range(-1.0..1.0) * l_const / k as f64;
            knots.push(knots[knots.len() - 1] + step);
        }
        let floor = knots.iter().cloned().fold(f64::INFINITY, f64::min);
        let lift = 1.0 + rng.gen_range(0.0..1.0) - floor;
        let knots: Vec<f64> = knots.into_iter().map(|v| v + lift).collect();
        let breaks = (0..=k).map(|j| j as f64 / k as f64).collect();
        let kf = k as f64;
        Self::callable(
            move |t| {
                let x = (t.clamp(0.0, 1.0) * kf).min(kf - 1e-12);
                let j = x as usize;
                let s = knots[j] + (knots[j + 1] - knots[j]) * (x - j as f64);
                s * s
            },
            breaks,
            "lipschitz",
        )
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    /// `(l, u)` with `l ≤ σ² ≤ u` (exact for the structured kinds, probed
    /// for callables).
    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// `σ²(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::Constant(v) => *v,
            ProfileKind::PiecewiseConstant { breaks, values } => {
                let k = breaks[1..].partition_point(|&b| b <= t);
                values[k.min(values.len() - 1)]
            }
            ProfileKind::BumpFamily {
                base,
                kernel,
                bumps,
            } => {
                let mut v = *base;
                let k = bumps.partition_point(|b| b.support().1 <= t);
                if let Some(b) = bumps.get(k) {
                    let (lo, hi) = b.support();
                    if t > lo && t < hi {
                        v += b.height * kernel.eval((t - b.center) / b.width);
                    }
                }
                v
            }
            ProfileKind::Callable { f, .. } => f(t),
        }
    }

    /// `σ(t) = √σ²(t)`.
    pub fn sigma(&self, t: f64) -> f64 {
        self.eval(t).sqrt()
    }

    /// Derivative of `σ²` of order `p ∈ {0, 1, 2}`; analytic where the kind
    /// allows it, central differences with step `1e-5` otherwise.
    pub fn derivative(&self, p: usize, t: f64) -> f64 {
        match (&self.kind, p) {
            (_, 0) => self.eval(t),
            (ProfileKind::Constant(_), _) => 0.0,
            (ProfileKind::BumpFamily { kernel, bumps, .. }, _) => {
                let k = bumps.partition_point(|b| b.support().1 <= t);
                match bumps.get(k) {
                    Some(b) if t > b.support().0 && t < b.support().1 => {
                        let u = (t - b.center) / b.width;
                        b.height * kernel.derivative(p, u) / b.width.powi(p as i32)
                    }
                    _ => 0.0,
                }
            }
            _ => central_difference(|x| self.eval(x), p, t),
        }
    }

    /// Partition of `[0, 1]` into pieces on which `σ²` is either constant
    /// or smooth.
    pub fn pieces(&self) -> Vec<Piece> {
        match &self.kind {
            ProfileKind::Constant(v) => vec![Piece {
                a: 0.0,
                b: 1.0,
                shape: PieceShape::Constant(*v),
            }],
            ProfileKind::PiecewiseConstant { breaks, values } => breaks
                .windows(2)
                .zip(values)
                .map(|(w, &v)| Piece {
                    a: w[0],
                    b: w[1],
                    shape: PieceShape::Constant(v),
                })
                .collect(),
            ProfileKind::BumpFamily { base, bumps, .. } => {
                let mut out = Vec::with_capacity(2 * bumps.len() + 1);
                let mut cursor = 0.0;
                for b in bumps {
                    let (lo, hi) = b.support();
                    if lo > cursor {
                        out.push(Piece {
                            a: cursor,
                            b: lo,
                            shape: PieceShape::Constant(*base),
                        });
                    }
                    out.push(Piece {
                        a: lo,
                        b: hi,
                        shape: PieceShape::Smooth,
                    });
                    cursor = hi;
                }
                if cursor < 1.0 {
                    out.push(Piece {
                        a: cursor,
                        b: 1.0,
                        shape: PieceShape::Constant(*base),
                    });
                }
                out
            }
            ProfileKind::Callable { breaks, .. } => breaks
                .windows(2)
                .map(|w| Piece {
                    a: w[0],
                    b: w[1],
                    shape: PieceShape::Smooth,
                })
                .collect(),
        }
    }

    /// Constant value of `σ²` on `[a, b]` if one piece covers it.
    pub fn constant_on(&self, a: f64, b: f64) -> Option<f64> {
        match &self.kind {
            ProfileKind::Constant(v) => Some(*v),
            _ => self.pieces().iter().find_map(|p| match p.shape {
                PieceShape::Constant(v) if p.a <= a && b <= p.b => Some(v),
                _ => None,
            }),
        }
    }

    /// Breakpoints of the piece partition strictly inside `(a, b)`.
    pub fn breaks_within(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = vec![a];
        for p in self.pieces() {
            if p.a > a && p.a < b {
                out.push(p.a);
            }
        }
        out.push(b);
        out
    }

    /// `∫_a^b w(u) σ²(u) du` to absolute tolerance `tol`.
    pub fn weighted_integral(
        &self,
        w: impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        tol: f64,
    ) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let breaks = self.breaks_within(a, b);
        quadrature::adaptive_pieces(|u| w(u) * self.eval(u), &breaks, tol)
    }

    pub fn integral(&self, a: f64, b: f64, tol: f64) -> Result<f64> {
        self.weighted_integral(|_| 1.0, a, b, tol)
    }

    /// Sup-norm distance probe used by tests and reports.
    pub fn max_abs_diff(&self, other: &VolatilityProfile, grid: usize) -> f64 {
        (0..=grid)
            .map(|k| {
                let t = k as f64 / grid as f64;
                (self.eval(t) - other.eval(t)).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn descriptor(&self) -> Value {
        match &self.kind {
            ProfileKind::Constant(v) => json!({"kind": "constant", "value": v}),
            ProfileKind::PiecewiseConstant { breaks, values } => {
                json!({"kind": "piecewise_constant", "breaks": breaks, "values": values})
            }
            ProfileKind::BumpFamily {
                base,
                kernel,
                bumps,
            } => json!({
                "kind": "bump_family",
                "base": base,
                "alpha": kernel.alpha(),
                "a": kernel.a(),
                "bumps": bumps
                    .iter()
                    .map(|b| json!({"center": b.center, "width": b.width, "height": b.height}))
                    .collect::<Vec<_>>(),
            }),
            ProfileKind::Callable { label, breaks, .. } => {
                json!({"kind": "callable", "label": label, "breaks": breaks})
            }
        }
    }
}

/// Central difference of order `p` at step `1e-5`, one-sided near the
/// ends of `[0, 1]`.
pub fn central_difference(f: impl Fn(f64) -> f64, p: usize, t: f64) -> f64 {
    let h = 1e-5;
    let t = t.clamp(h, 1.0 - h);
    match p {
        0 => f(t),
        1 => (f(t + h) - f(t - h)) / (2.0 * h),
        2 => (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h),
        _ => f64::NAN,
    }
}
