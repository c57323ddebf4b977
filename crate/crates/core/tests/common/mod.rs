//! Test-side oracles, written without the library's factorizations.
#![allow(dead_code)]

use mnlab_core::hypothesis::BumpKernel;
use mnlab_core::linalg::{Matrix, SymMatrix};
use mnlab_core::profile::{Bump, VolatilityProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// `GGᵗ + shift·I`.
pub fn random_spd(rng: &mut impl Rng, n: usize, shift: f64) -> SymMatrix {
    let g = random_matrix(rng, n, n);
    SymMatrix::from_fn(n, |i, j| {
        let s: f64 = (0..n).map(|k| g[(i, k)] * g[(j, k)]).sum();
        s + if i == j { shift } else { 0.0 }
    })
}

/// `GGᵗ` with `G` of size `n × rank`.
pub fn random_psd(rng: &mut impl Rng, n: usize, rank: usize) -> SymMatrix {
    let g = random_matrix(rng, n, rank);
    SymMatrix::from_fn(n, |i, j| (0..rank).map(|k| g[(i, k)] * g[(j, k)]).sum())
}

pub fn random_sym(rng: &mut impl Rng, n: usize) -> SymMatrix {
    let g = random_matrix(rng, n, n);
    SymMatrix::from_fn(n, |i, j| 0.5 * (g[(i, j)] + g[(j, i)]))
}

/// LU with partial pivoting: `(inverse, ln|det|)`.
pub fn naive_inverse_logdet(m: &Matrix) -> (Matrix, f64) {
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut logdet = 0.0;
    for col in 0..n {
        let p = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, p);
        inv.swap(col, p);
        let piv = a[col][col];
        logdet += piv.abs().ln();
        for j in 0..n {
            a[col][j] /= piv;
            inv[col][j] /= piv;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[r][j] -= f * a[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    (Matrix::from_fn(n, n, |i, j| inv[i][j]), logdet)
}

/// `½(tr(Σ₀⁻¹Σ₁) − n − ln det Σ₁ + ln det Σ₀)` by Gauss–Jordan.
pub fn naive_kl(s0: &SymMatrix, s1: &SymMatrix) -> f64 {
    let n = s0.n();
    let (inv0, ld0) = naive_inverse_logdet(s0.as_matrix());
    let (_, ld1) = naive_inverse_logdet(s1.as_matrix());
    let mut tr = 0.0;
    for i in 0..n {
        for k in 0..n {
            tr += inv0[(i, k)] * s1.get(k, i);
        }
    }
    0.5 * (tr - n as f64 - ld1 + ld0)
}

/// `‖Σ₀⁻¹Σ₁ − I‖_F²` by Gauss–Jordan.
pub fn naive_right_norm(s0: &SymMatrix, s1: &SymMatrix) -> f64 {
    let n = s0.n();
    let (inv0, _) = naive_inverse_logdet(s0.as_matrix());
    let mut f = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut v: f64 = (0..n).map(|k| inv0[(i, k)] * s1.get(k, j)).sum();
            if i == j {
                v -= 1.0;
            }
            f += v * v;
        }
    }
    f
}

/// Composite Simpson with `panels` (even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Profiles bounded below by 1: a constant, steps, bumps or a smooth wave.
pub fn random_profile(rng: &mut impl Rng) -> VolatilityProfile {
    match rng.gen_range(0..4) {
        0 => VolatilityProfile::constant(rng.gen_range(1.0..3.0)).unwrap(),
        1 => {
            let k = rng.gen_range(2..5);
            let breaks = (0..=k).map(|j| j as f64 / k as f64).collect();
            let values = (0..k).map(|_| rng.gen_range(1.0..3.0)).collect();
            VolatilityProfile::piecewise_constant(breaks, values).unwrap()
        }
        2 => {
            let m = rng.gen_range(1..5);
            let h = 1.0 / (2.0 * m as f64);
            let bumps = (0..m)
                .map(|k| Bump {
                    center: 0.25 + h * (k as f64 + 0.5),
                    width: h,
                    height: rng.gen_range(0.0..2.0),
                })
                .collect();
            let kernel = BumpKernel::with_constant(1.0, 1.0).unwrap();
            VolatilityProfile::bump_family(1.0, kernel, bumps).unwrap()
        }
        _ => {
            let amp = rng.gen_range(0.0..0.9);
            let freq = rng.gen_range(0.5..3.0);
            VolatilityProfile::callable(
                move |t| 2.0 + amp * (2.0 * std::f64::consts::PI * freq * t).sin(),
                vec![0.0, 1.0],
                "wave",
            )
            .unwrap()
        }
    }
}

/// `σ²` for a piecewise-linear `σ ≥ 1` with slopes at most `l_const`.
pub fn random_lipschitz_sigma(rng: &mut impl Rng, l_const: f64) -> VolatilityProfile {
    let k = rng.gen_range(2..12);
    let mut knots = vec![0.0f64];
    for _ in 0..k {
        let step = rng.gen_range(-1.0..1.0) * l_const / k as f64;
        knots.push(knots.last().unwrap() + step);
    }
    let lift = 1.0 + rng.gen_range(0.0..2.0) - knots.iter().cloned().fold(f64::INFINITY, f64::min);
    let knots: Vec<f64> = knots.into_iter().map(|v| v + lift).collect();
    let breaks: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();
    VolatilityProfile::callable(
        move |t| {
            let x = (t.clamp(0.0, 1.0) * k as f64).min(k as f64 - 1e-12);
            let j = x.floor() as usize;
            let s = knots[j] + (knots[j + 1] - knots[j]) * (x - j as f64);
            s * s
        },
        breaks,
        "lipschitz",
    )
    .unwrap()
}
