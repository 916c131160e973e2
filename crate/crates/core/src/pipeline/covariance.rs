//! Linear shrinkage covariance toward a scaled identity.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MIN_OBSERVATIONS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct ShrunkCovariance {
    pub covariance: DMatrix<f64>,
    /// Weight on the identity target, in `[0, 1]`.
    pub intensity: f64,
    pub sample: DMatrix<f64>,
}

/// Demeaned observations as a `T x p` matrix.
fn centered(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let t = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    let x = DMatrix::from_fn(t, p, |i, j| rows[i][j]);
    let means = DVector::from_fn(p, |j, _| x.column(j).mean());
    DMatrix::from_fn(t, p, |i, j| x[(i, j)] - means[j])
}

/// Shrinkage estimate `s μ I + (1 - s) S` with the intensity `s` of
/// Ledoit and Wolf (2004). `S` uses the `1/T` normalisation.
pub fn estimate_covariance(rows: &[Vec<f64>]) -> Result<ShrunkCovariance> {
    let t = rows.len();
    if t < MIN_OBSERVATIONS {
        return Err(Error::TooFewObservations { need: MIN_OBSERVATIONS, got: t });
    }
    let x = centered(rows);
    let p = x.ncols();
    if p < 2 {
        return Err(Error::TooFewAssets { need: 2, got: p });
    }
    let tf = t as f64;
    let sample = x.transpose() * &x / tf;
    let mu = sample.trace() / p as f64;
    if !(mu > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let target = DMatrix::<f64>::identity(p, p) * mu;
    let d2 = (&sample - &target).norm_squared() / p as f64;
    let mut b2 = 0.0;
    for k in 0..t {
        let row = x.row(k).transpose();
        let outer = &row * row.transpose();
        b2 += (outer - &sample).norm_squared();
    }
    b2 /= tf * tf * p as f64;
    let intensity = if d2 > 0.0 { (b2.min(d2) / d2).clamp(0.0, 1.0) } else { 1.0 };
    let covariance = &target * intensity + &sample * (1.0 - intensity);
    Ok(ShrunkCovariance { covariance, intensity, sample })
}

/// Per-asset sample standard deviations (`1/(T-1)` normalisation).
pub fn volatilities(rows: &[Vec<f64>]) -> Vec<f64> {
    let x = centered(rows);
    let denom = (rows.len().max(2) - 1) as f64;
    (0..x.ncols()).map(|j| (x.column(j).norm_squared() / denom).sqrt()).collect()
}
