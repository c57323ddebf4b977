use crate::error::{Error, Result};
use crate::linalg::matrix::{Matrix, SymMatrix};

/// Sweep cap for the cyclic Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 50;

/// Eigen-decomposition of a symmetric matrix.
///
/// `values` are sorted descending; column `i` of `vectors` is the unit
/// eigenvector paired with `values[i]`.
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenResult {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }

    pub fn min_value(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }

    pub fn max_value(&self) -> f64 {
        *self.values.first().unwrap_or(&0.0)
    }
}

/// Cyclic Jacobi eigen-decomposition.
///
/// Iterates until the off-diagonal Frobenius mass drops below
/// `1e-3·tol·‖M‖_F` or a full sweep performs no rotation. After
/// [`JACOBI_MAX_SWEEPS`] sweeps returns [`Error::NoConvergence`] with the
/// remaining off-diagonal norm.
pub fn sym_eigen(m: &SymMatrix, tol: f64) -> Result<EigenResult> {
    let n = m.n();
    let fro = m.frobenius_norm();
    let mut a: Vec<f64> = m.as_matrix().as_slice().to_vec();
    // rows of Vᵗ, so both updates in a rotation touch contiguous memory
    let mut vt = Matrix::identity(n);
    let target = 1e-3 * tol * fro;
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a, n);
        if off <= target || off == 0.0 {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                residual: off,
            });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // negligible against both diagonals: annihilate without rotating
                if apq.abs() * 1e-3 <= f64::EPSILON * app.abs().min(aqq.abs())
                    && app.abs() > 0.0
                    && aqq.abs() > 0.0
                {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate_rows(&mut a, n, p, q, c, s);
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        a[k * n + p] = a[p * n + k];
                        a[k * n + q] = a[q * n + k];
                    }
                }
                let (rp, rq) = two_rows(&mut vt, p, q);
                for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
                    let (vp, vq) = (*x, *y);
                    *x = c * vp - s * vq;
                    *y = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| vt[(order[c], r)]);
    Ok(EigenResult { values, vectors })
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += a[i * n + j] * a[i * n + j];
        }
    }
    (2.0 * s).sqrt()
}

fn rotate_rows(a: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = a.split_at_mut(q * n);
    let rp = &mut head[p * n..(p + 1) * n];
    let rq = &mut tail[..n];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (ap, aq) = (*x, *y);
        *x = c * ap - s * aq;
        *y = s * ap + c * aq;
    }
}

fn two_rows(m: &mut Matrix, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    let cols = m.cols();
    let (head, tail) = m.as_mut_slice().split_at_mut(q * cols);
    (&mut head[p * cols..(p + 1) * cols], &mut tail[..cols])
}

/// Eigenvalues only, sorted descending, by Householder tridiagonalisation
/// followed by implicit QL. Roughly an order of magnitude faster than
/// [`sym_eigen`] and used where vectors are not needed.
pub fn sym_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>> {
    let n = m.n();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a: Vec<f64> = m.as_matrix().as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut a, n, &mut d, &mut e);
    tridiagonal_ql(&mut d, &mut e)?;
    d.sort_by(|x, y| y.total_cmp(x));
    Ok(d)
}

fn tridiagonalize(a: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64]) {
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[i * n + k].abs()).sum();
            if scale == 0.0 {
                e[i] = a[i * n + l];
            } else {
                for k in 0..=l {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let f = a[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j * n + k] * a[i * n + k];
                    }
                    for k in (j + 1)..=l {
                        g += a[k * n + j] * a[i * n + k];
                    }
                    e[j] = g / h;
                    f += e[j] * a[i * n + j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j * n + k] -= f * e[k] + g * a[i * n + k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }
    e[0] = 0.0;
    for i in 0..n {
        d[i] = a[i * n + i];
    }
}

fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() < f64::MIN_POSITIVE {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence {
                    sweeps: iter,
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a_matrix(n: usize) -> SymMatrix {
        SymMatrix::from_fn(n, |i, j| {
            if i == j {
                if i == 0 {
                    1.0
                } else {
                    2.0
                }
            } else if j == i + 1 {
                -1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn diagonal_sorted_descending() {
        let m = SymMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let r = sym_eigen(&m, 1e-12).unwrap();
        assert_eq!(r.values, vec![3.0, 2.0, 1.0]);
        assert_eq!(sym_eigenvalues(&m).unwrap(), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn a3_spectrum() {
        let r = sym_eigen(&a_matrix(3), 1e-12).unwrap();
        let expect = [3.2469796037174667, 1.5549581320873711, 0.19806226419516163];
        for (v, e) in r.values.iter().zip(expect) {
            assert!((v - e).abs() < 1e-12, "{v} vs {e}");
        }
        assert!((r.values.iter().sum::<f64>() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn qinv2_spectrum() {
        let m = SymMatrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let r = sym_eigen(&m, 1e-12).unwrap();
        let s5 = 5f64.sqrt();
        assert!((r.values[0] - (3.0 + s5) / 2.0).abs() < 1e-14);
        assert!((r.values[1] - (3.0 - s5) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_and_ql_agree() {
        let n = 40;
        let m = SymMatrix::from_fn(n, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0);
        let j = sym_eigen(&m, 1e-12).unwrap();
        let q = sym_eigenvalues(&m).unwrap();
        for (x, y) in j.values.iter().zip(&q) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
        for i in 0..n {
            let v = j.vector(i);
            let mv = m.matvec(&v).unwrap();
            let res: f64 = mv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - j.values[i] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-11 * m.frobenius_norm());
        }
    }
}
