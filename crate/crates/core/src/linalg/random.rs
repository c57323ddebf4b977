//! Seeded random test matrices.

use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{Matrix, SymMatrix};

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `GGᵗ/k + shift·I` with `G` of size `n × k`; PSD of rank `min(n, k)`
/// before the shift.
pub fn random_gram(rng: &mut impl Rng, n: usize, k: usize, shift: f64) -> SymMatrix {
    let g = gaussian_matrix(rng, n, k);
    let scale = 1.0 / k.max(1) as f64;
    SymMatrix::from_fn(n, |i, j| {
        let s: f64 = g.row(i).iter().zip(g.row(j)).map(|(a, b)| a * b).sum();
        scale * s + if i == j { shift } else { 0.0 }
    })
}

/// Symmetric with independent standard normal upper triangle.
pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> SymMatrix {
    SymMatrix::from_fn(n, |_, _| rng.sample(StandardNormal))
}
