//! Test of equal Sharpe ratios with a HAC-robust delta method (Ledoit and Wolf, 2008).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const MIN_LENGTH: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeTest {
    /// Difference of per-period Sharpe ratios, `a - b`.
    pub difference: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub bandwidth: f64,
}

/// Parzen kernel weight.
pub fn parzen(x: f64) -> f64 {
    let x = x.abs();
    if x <= 0.5 {
        1.0 - 6.0 * x * x + 6.0 * x * x * x
    } else if x <= 1.0 {
        2.0 * (1.0 - x).powi(3)
    } else {
        0.0
    }
}

/// Andrews (1991) AR(1) plug-in bandwidth for the Parzen kernel.
pub fn parzen_bandwidth(y: &DMatrix<f64>) -> f64 {
    let t = y.nrows();
    let (mut num, mut den) = (0.0, 0.0);
    for c in 0..y.ncols() {
        let col = y.column(c);
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for i in 1..t {
            sxy += col[i] * col[i - 1];
            sxx += col[i - 1] * col[i - 1];
        }
        if sxx <= 0.0 {
            continue;
        }
        let rho = (sxy / sxx).clamp(-0.97, 0.97);
        let resid: f64 = (1..t).map(|i| (col[i] - rho * col[i - 1]).powi(2)).sum::<f64>() / (t - 1) as f64;
        let s4 = resid * resid;
        num += 4.0 * rho * rho * s4 / (1.0 - rho).powi(8);
        den += s4 / (1.0 - rho).powi(4);
    }
    let alpha2 = if den > 0.0 { num / den } else { 0.0 };
    2.6614 * (alpha2 * t as f64).powf(0.2)
}

/// Kernel estimate of the long-run covariance of the rows of `y` (already demeaned),
/// with the `T / (T - k)` small-sample correction for `k` estimated moments.
pub fn hac_covariance(y: &DMatrix<f64>, bandwidth: f64) -> DMatrix<f64> {
    let t = y.nrows();
    let k = y.ncols();
    let mut psi = y.transpose() * y / t as f64;
    if bandwidth > 0.0 {
        for lag in 1..t {
            let w = parzen(lag as f64 / bandwidth);
            if w == 0.0 {
                break;
            }
            let gamma = y.rows(lag, t - lag).transpose() * y.rows(0, t - lag) / t as f64;
            psi += (&gamma + gamma.transpose()) * w;
        }
    }
    psi * (t as f64 / (t - k) as f64)
}

pub fn sharpe_test(a: &[f64], b: &[f64]) -> Result<SharpeTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let t = a.len();
    if t < MIN_LENGTH {
        return Err(Error::TooShortSeries { need: MIN_LENGTH, got: t });
    }
    let tf = t as f64;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / tf;
    let (mu_a, mu_b) = (mean(a), mean(b));
    let ga = a.iter().map(|x| x * x).sum::<f64>() / tf;
    let gb = b.iter().map(|x| x * x).sum::<f64>() / tf;
    let (va, vb) = (ga - mu_a * mu_a, gb - mu_b * mu_b);
    if !(va > 0.0 && vb > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let difference = mu_a / va.sqrt() - mu_b / vb.sqrt();
    if a == b {
        return Ok(SharpeTest { difference: 0.0, statistic: 0.0, p_value: 1.0, bandwidth: 0.0 });
    }
    let grad = DVector::from_vec(vec![
        ga / va.powf(1.5),
        -gb / vb.powf(1.5),
        -mu_a / (2.0 * va.powf(1.5)),
        mu_b / (2.0 * vb.powf(1.5)),
    ]);
    let y = DMatrix::from_fn(t, 4, |i, j| match j {
        0 => a[i] - mu_a,
        1 => b[i] - mu_b,
        2 => a[i] * a[i] - ga,
        _ => b[i] * b[i] - gb,
    });
    let bandwidth = parzen_bandwidth(&y);
    let psi = hac_covariance(&y, bandwidth);
    let var = (grad.transpose() * psi * &grad)[(0, 0)] / tf;
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let statistic = difference / var.sqrt();
    let normal = Normal::standard();
    let p_value = (2.0 * (1.0 - normal.cdf(statistic.abs()))).clamp(0.0, 1.0);
    Ok(SharpeTest { difference, statistic, p_value, bandwidth })
}
