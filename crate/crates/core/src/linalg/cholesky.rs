use crate::error::{Error, Result};
use crate::linalg::matrix::{dot, Matrix, SymMatrix};

/// Lower Cholesky factor stored by envelope: row `i` holds
/// `L[i][first[i]..=i]`. Entries left of `first[i]` are structurally zero,
/// so banded and arrow-shaped covariances factor in time proportional to
/// their profile rather than `n³`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    first: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl Cholesky {
    /// Factors `M = L·Lᵗ`.
    ///
    /// A pivot at or below `n·ε·max_diag` aborts with
    /// [`Error::NotPositiveDefinite`] carrying the zero-based pivot index and
    /// its value before the square root.
    pub fn factor(m: &SymMatrix) -> Result<Self> {
        let n = m.n();
        let max_diag = (0..n).map(|i| m.get(i, i).abs()).fold(0.0, f64::max);
        let threshold = n as f64 * f64::EPSILON * max_diag;
        let mut first = Vec::with_capacity(n);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let fi = m.first_nonzero_in_row(i);
            let src = m.row(i);
            let mut row = vec![0.0; i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let rj: &Vec<f64> = &rows[j];
                let s = dot(&row[lo - fi..j - fi], &rj[lo - fj..j - fj]);
                row[j - fi] = (src[j] - s) / rj[j - fj];
            }
            let head = &row[..i - fi];
            let pivot = src[i] - dot(head, head);
            if !(pivot > threshold) {
                return Err(Error::NotPositiveDefinite {
                    pivot: i,
                    value: pivot,
                });
            }
            row[i - fi] = pivot.sqrt();
            first.push(fi);
            rows.push(row);
        }
        Ok(Self { first, rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.rows[i][i - self.first[i]]
    }

    /// `L[i][j]`, zero outside the envelope.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i || j < self.first[i] {
            0.0
        } else {
            self.rows[i][j - self.first[i]]
        }
    }

    /// Envelope start of row `i`.
    pub fn first(&self, i: usize) -> usize {
        self.first[i]
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n()).map(|i| self.diag(i).ln()).sum::<f64>()
    }

    pub fn to_lower(&self) -> Matrix {
        let n = self.n();
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            let fi = self.first[i];
            l.row_mut(i)[fi..=i].copy_from_slice(&self.rows[i]);
        }
        l
    }

    /// Solves `L·y = b` in place. Entries of `b` before `start` must be zero
    /// and are left untouched.
    pub fn forward_from(&self, b: &mut [f64], start: usize) {
        for i in start..self.n() {
            let fi = self.first[i].max(start);
            let row = &self.rows[i];
            let off = self.first[i];
            let s = dot(&row[fi - off..i - off], &b[fi..i]);
            b[i] = (b[i] - s) / row[i - off];
        }
    }

    pub fn forward(&self, b: &mut [f64]) {
        self.forward_from(b, 0);
    }

    /// Solves `Lᵗ·x = y` in place.
    pub fn backward(&self, y: &mut [f64]) {
        for i in (0..self.n()).rev() {
            let off = self.first[i];
            let row = &self.rows[i];
            let xi = y[i] / row[i - off];
            y[i] = xi;
            if xi != 0.0 {
                for (yk, &lik) in y[off..i].iter_mut().zip(&row[..i - off]) {
                    *yk -= lik * xi;
                }
            }
        }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let start = b.iter().position(|&v| v != 0.0).unwrap_or(b.len());
        self.forward_from(b, start);
        self.backward(b);
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: b.len(),
            });
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub fn solve_matrix(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: b.rows(),
            });
        }
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve_vec(&b.column(j))?;
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// `‖M⁻¹‖_F²`, column by column.
    pub fn inverse_frobenius_sq(&self) -> f64 {
        let n = self.n();
        let mut e = vec![0.0; n];
        let mut total = 0.0;
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.forward_from(&mut e, j);
            self.backward(&mut e);
            total += dot(&e, &e);
        }
        total
    }

    /// `L·z`, used to colour white noise.
    pub fn lower_mul(&self, z: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let off = self.first[i];
                dot(&self.rows[i], &z[off..=i])
            })
            .collect()
    }
}

/// Dense lower-triangular factor `L` with `L·Lᵗ = M`.
pub fn cholesky(m: &SymMatrix) -> Result<Matrix> {
    Ok(Cholesky::factor(m)?.to_lower())
}

/// Solves `M·X = B` for positive definite `M`.
pub fn solve_spd(m: &SymMatrix, b: &Matrix) -> Result<Matrix> {
    if b.rows() != m.n() {
        return Err(Error::DimensionMismatch {
            expected: m.n(),
            found: b.rows(),
        });
    }
    Cholesky::factor(m)?.solve_matrix(b)
}
