//! Convergence diagnostics for parallel chains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::walks::WalkCounters;

/// Potential scale reduction factor of one scalar across `m >= 2` chains of
/// equal length `n >= 2`.
///
/// `B = n/(m-1) Σ (mean_j - mean)^2`, `W` the mean within-chain variance,
/// `V = (n-1)/n W + B/n`, `R = sqrt(V / W)`.
pub fn psrf(chains: &[Vec<f64>], coordinate: usize) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::InvalidArgument("psrf needs at least two chains".into()));
    }
    let n = chains[0].len();
    if n < 2 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidArgument("chains must have equal length of at least two".into()));
    }
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = nf / (m as f64 - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m as f64;
    if w <= 0.0 {
        return Err(Error::ZeroVariance(coordinate));
    }
    let v = (nf - 1.0) / nf * w + b / nf;
    Ok((v / w).sqrt())
}

/// PSRF per coordinate of vector-valued chains, `chains[j][t][i]`.
pub fn psrf_per_coordinate(chains: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
    let d = chains
        .first()
        .and_then(|c| c.first())
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("empty chains".into()))?;
    if chains.iter().flatten().any(|x| x.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: 0 });
    }
    (0..d)
        .map(|i| {
            let scalar: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|x| x[i]).collect()).collect();
            psrf(&scalar, i)
        })
        .collect()
}

/// Effective sample size by non-overlapping batch means with `floor(sqrt(n))` batches.
pub fn batch_means_ess(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return n as f64;
    }
    let batches = (n as f64).sqrt().floor() as usize;
    let size = n / batches;
    let used = batches * size;
    let mean = series[..used].iter().sum::<f64>() / used as f64;
    let var = series[..used].iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (used as f64 - 1.0);
    if var <= 0.0 {
        return n as f64;
    }
    let bm: Vec<f64> = series[..used].chunks(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let bvar = bm.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    let sigma2 = size as f64 * bvar;
    if sigma2 <= 0.0 {
        return n as f64;
    }
    (n as f64 * var / sigma2).min(n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub chains: usize,
    pub length: usize,
    pub psrf: Vec<f64>,
    pub max_psrf: f64,
    pub ess: Vec<f64>,
    pub counters: WalkCounters,
    pub violation_rate: f64,
}

impl ChainReport {
    pub fn new(chains: &[Vec<Vec<f64>>], counters: WalkCounters) -> Result<Self> {
        let psrf = psrf_per_coordinate(chains)?;
        let d = psrf.len();
        let ess = (0..d)
            .map(|i| chains.iter().map(|c| batch_means_ess(&c.iter().map(|x| x[i]).collect::<Vec<_>>())).sum())
            .collect();
        Ok(Self {
            chains: chains.len(),
            length: chains[0].len(),
            max_psrf: psrf.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            psrf,
            ess,
            violation_rate: counters.violation_rate(),
            counters,
        })
    }
}
