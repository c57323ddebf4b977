use crate::error::{Error, Result};
use crate::linalg::cholesky::Cholesky;
use crate::linalg::eigen::sym_eigenvalues;
use crate::linalg::matrix::SymMatrix;

/// Default relative tolerance for PSD and Loewner tests.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

pub fn frobenius_norm(m: &SymMatrix) -> f64 {
    m.frobenius_norm()
}

/// `λ_min(M) ≥ −tol·‖M‖_F`.
///
/// Decided by a Cholesky attempt on `M + tol·‖M‖_F·I`. Success proves the
/// claim; a clearly negative pivot disproves it (a leading principal block
/// is then indefinite). Only pivots inside the rounding band fall back to
/// the full spectrum.
pub fn is_psd(m: &SymMatrix, tol: f64) -> bool {
    let fro = m.frobenius_norm();
    if fro == 0.0 {
        return true;
    }
    let shift = tol * fro;
    match Cholesky::factor(&m.shifted(shift)) {
        Ok(_) => true,
        Err(Error::NotPositiveDefinite { value, .. }) => {
            let band = 1e3 * m.n() as f64 * f64::EPSILON * fro;
            if value < -band {
                return false;
            }
            match sym_eigenvalues(m) {
                Ok(vals) => vals.last().map_or(true, |&l| l >= -shift),
                Err(_) => false,
            }
        }
        Err(_) => false,
    }
}

/// `Lo ≤ Hi` in Loewner order, i.e. `is_psd(Hi − Lo, tol)`.
pub fn loewner_leq(lo: &SymMatrix, hi: &SymMatrix, tol: f64) -> Result<bool> {
    if lo.n() != hi.n() {
        return Err(Error::DimensionMismatch {
            expected: lo.n(),
            found: hi.n(),
        });
    }
    Ok(is_psd(&hi.sub(lo)?, tol))
}
