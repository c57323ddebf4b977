//! Small regression and summary helpers.

use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares line `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
}

/// Ordinary least squares; `slope_se` is 0 for two points.
pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let k = x.len();
    if k < 2 {
        return Err(Error::InvalidSpec("a fit needs at least two points".into()));
    }
    let kf = k as f64;
    let mx = x.iter().sum::<f64>() / kf;
    let my = y.iter().sum::<f64>() / kf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidSpec("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if k > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (kf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        slope_se,
        intercept,
    })
}

/// Fit of `log₂ y` on `log₂ x`; every value must be positive.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if let Some(v) = x.iter().chain(y).find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidSpec(format!("log-log fit of non-positive value {v}")));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.log2()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log2()).collect();
    line_fit(&lx, &ly)
}

/// Sample mean and its standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Unbiased sample variance and its standard error under a fourth-moment
/// estimate.
pub fn variance_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    if v.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / k;
    let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
    let m4 = v.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / k;
    let var = m2 * k / (k - 1.0);
    (var, ((m4 - m2 * m2).max(0.0) / k).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let f = line_fit(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15);
        assert!(f.slope_se < 1e-15);
    }

    #[test]
    fn power_law() {
        let x = [256.0, 512.0, 1024.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((log_log_fit(&x, &y).unwrap().slope + 0.5).abs() < 1e-14);
        assert!(log_log_fit(&x, &[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn moments() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!((variance_se(&[1.0, 2.0, 3.0, 4.0]).0 - 5.0 / 3.0).abs() < 1e-15);
    }
}
