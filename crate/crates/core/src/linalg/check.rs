//! Self-check of the dense kernels on seeded random inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::random::{random_gram, random_symmetric};
use super::{is_psd, sym_eigen, sym_eigenvalues, Cholesky, Matrix, DEFAULT_PSD_TOL};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinalgCheck {
    pub n: usize,
    pub seed: u64,
    pub tol: f64,
    /// `max |LLᵗ − M| / ‖M‖_F` for an SPD input.
    pub cholesky_residual: f64,
    /// `max |VΛVᵗ − M| / ‖M‖_F` from the Jacobi solver.
    pub eigen_residual: f64,
    /// `max |Vᵗ V − I|`.
    pub orthogonality_residual: f64,
    /// Largest gap between Jacobi and tridiagonal-QL eigenvalues over `‖M‖_F`.
    pub solver_agreement: f64,
    /// `is_psd` accepts a rank-deficient Gram matrix and rejects
    /// `−I`-shifted input.
    pub psd_classification: bool,
    pub pass: bool,
}

/// Runs every check at size `n`; each residual must stay within `tol`.
pub fn self_check(n: usize, seed: u64, tol: f64) -> Result<LinalgCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spd = random_gram(&mut rng, n, n, 0.1);
    let fro = spd.frobenius_norm();
    let l = Cholesky::factor(&spd)?.to_lower();
    let cholesky_residual = l.matmul(&l.transpose())?.max_abs_diff(spd.as_matrix()) / fro;

    let sym = random_symmetric(&mut rng, n);
    let sfro = sym.frobenius_norm().max(f64::MIN_POSITIVE);
    let e = sym_eigen(&sym, 1e-14)?;
    let v = &e.vectors;
    let lam = Matrix::from_diagonal(&e.values);
    let recon = v.matmul(&lam)?.matmul(&v.transpose())?;
    let eigen_residual = recon.max_abs_diff(sym.as_matrix()) / sfro;
    let orthogonality_residual = v.transpose().matmul(v)?.max_abs_diff(&Matrix::identity(n));
    let ql = sym_eigenvalues(&sym)?;
    let solver_agreement = e
        .values
        .iter()
        .zip(&ql)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / sfro;

    let low_rank = random_gram(&mut rng, n, (n / 2).max(1), 0.0);
    let indefinite = low_rank.shifted(-1.0);
    let psd_classification =
        is_psd(&low_rank, DEFAULT_PSD_TOL) && !is_psd(&indefinite, DEFAULT_PSD_TOL);

    let pass = cholesky_residual <= tol
        && eigen_residual <= tol
        && orthogonality_residual <= tol
        && solver_agreement <= tol
        && psd_classification;
    Ok(LinalgCheck {
        n,
        seed,
        tol,
        cholesky_residual,
        eigen_residual,
        orthogonality_residual,
        solver_agreement,
        psd_classification,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_at_several_sizes() {
        for n in [1, 2, 7, 40] {
            let c = self_check(n, 3, 1e-10).unwrap();
            assert!(c.pass, "{c:?}");
        }
    }
}
