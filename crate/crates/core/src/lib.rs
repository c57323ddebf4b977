//! Numerical core for checking minimax lower-bound constructions in
//! Gaussian volatility models observed under additive noise.

pub mod certificate;
pub mod covariance;
pub mod error;
pub mod hypothesis;
pub mod kl;
pub mod linalg;
pub mod montecarlo;
pub mod profile;
pub mod quadrature;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
