//! Bivariate risk-return summary of one volatility level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_PATHS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub level: usize,
    /// Mean of `(annual std, annual return)`.
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    /// Risk-return correlation; NaN when either coordinate is constant.
    pub correlation: f64,
    /// Counter-clockwise convex hull vertices.
    pub hull: Vec<[f64; 2]>,
}

impl ClusterSummary {
    /// Whether `p` lies in the closed convex hull.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self.hull.len() {
            0 => false,
            1 => self.hull[0] == p,
            2 => on_segment(self.hull[0], self.hull[1], p),
            n => (0..n).all(|i| cross(self.hull[i], self.hull[(i + 1) % n], p) >= -1e-12),
        }
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    cross(a, b, p).abs() <= 1e-12
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Andrew's monotone chain.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Summary of `(annual std, annual return)` pairs for one level.
pub fn cluster_summary(level: usize, pairs: &[[f64; 2]]) -> Result<ClusterSummary> {
    let n = pairs.len();
    if n < MIN_PATHS {
        return Err(Error::TooFewObservations { need: MIN_PATHS, got: n });
    }
    let nf = n as f64;
    // Shifted by the first pair so that identical pairs give an exact mean.
    let o = pairs[0];
    let mean = [
        o[0] + pairs.iter().map(|p| p[0] - o[0]).sum::<f64>() / nf,
        o[1] + pairs.iter().map(|p| p[1] - o[1]).sum::<f64>() / nf,
    ];
    let mut cov = [[0.0; 2]; 2];
    for p in pairs {
        let d = [p[0] - mean[0], p[1] - mean[1]];
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] += d[i] * d[j] / (nf - 1.0);
            }
        }
    }
    let correlation =
        if cov[0][0] > 0.0 && cov[1][1] > 0.0 { cov[0][1] / (cov[0][0] * cov[1][1]).sqrt() } else { f64::NAN };
    Ok(ClusterSummary { level, mean, covariance: cov, correlation, hull: convex_hull(pairs) })
}
