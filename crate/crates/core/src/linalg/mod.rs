//! Dense symmetric linear algebra.

pub mod check;
pub mod cholesky;
pub mod eigen;
pub mod matrix;
pub mod psd;
pub mod random;

pub use cholesky::{cholesky, solve_spd, Cholesky};
pub use eigen::{sym_eigen, sym_eigenvalues, EigenResult, JACOBI_MAX_SWEEPS};
pub use matrix::{dot, Matrix, SymMatrix};
pub use psd::{frobenius_norm, is_psd, loewner_leq, DEFAULT_PSD_TOL};
pub use check::{self_check, LinalgCheck};
