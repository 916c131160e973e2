//! Variance targets from volatility-sorted equal-weight groups.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_LEVELS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilityLevels {
    /// Non-decreasing variance targets.
    pub targets: Vec<f64>,
    /// `permutation[m]` is the group whose portfolio defines `targets[m]`.
    pub permutation: Vec<usize>,
    /// Asset indices per group, lowest volatility first.
    pub groups: Vec<Vec<usize>>,
}

impl VolatilityLevels {
    pub fn is_reordered(&self) -> bool {
        self.permutation.iter().enumerate().any(|(m, &g)| m != g)
    }
}

/// Group sizes for `n` assets in `k` groups, remainder to the lowest groups.
pub fn group_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|m| n / k + usize::from(m < n % k)).collect()
}

pub fn quintile_targets(cov: &DMatrix<f64>, vols: &[f64]) -> Result<VolatilityLevels> {
    let n = vols.len();
    if n < N_LEVELS {
        return Err(Error::TooFewAssets { need: N_LEVELS, got: n });
    }
    if cov.nrows() != n || cov.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: cov.nrows() });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vols[a].total_cmp(&vols[b]).then(a.cmp(&b)));
    let mut groups = Vec::with_capacity(N_LEVELS);
    let mut start = 0;
    for size in group_sizes(n, N_LEVELS) {
        groups.push(order[start..start + size].to_vec());
        start += size;
    }
    let raw: Vec<f64> = groups
        .iter()
        .map(|g| {
            let mut x = DVector::zeros(n);
            for &i in g {
                x[i] = 1.0 / g.len() as f64;
            }
            (x.transpose() * cov * &x)[(0, 0)]
        })
        .collect();
    let mut permutation: Vec<usize> = (0..N_LEVELS).collect();
    permutation.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]).then(a.cmp(&b)));
    let targets = permutation.iter().map(|&g| raw[g]).collect();
    Ok(VolatilityLevels { targets, permutation, groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_ten_assets() {
        let lv = quintile_targets(&DMatrix::identity(10, 10), &[1.0; 10]).unwrap();
        assert!(lv.targets.iter().all(|c| (c - 0.5).abs() < 1e-15));
    }

    #[test]
    fn remainder_goes_low() {
        assert_eq!(group_sizes(12, 5), vec![3, 3, 2, 2, 2]);
        assert_eq!(group_sizes(30, 5), vec![6; 5]);
    }

    #[test]
    fn perfectly_correlated_equal_vol() {
        let cov = DMatrix::from_element(7, 7, 0.04);
        let lv = quintile_targets(&cov, &[0.2; 7]).unwrap();
        assert!(lv.targets.iter().all(|c| (c - 0.04).abs() < 1e-15));
    }

    #[test]
    fn too_few_assets() {
        assert!(matches!(quintile_targets(&DMatrix::identity(4, 4), &[1.0; 4]), Err(Error::TooFewAssets { .. })));
    }

    #[test]
    fn non_monotone_targets_are_sorted() {
        // Lowest-vol group is perfectly correlated, so its equal-weight variance is highest.
        let mut cov = DMatrix::identity(5, 5);
        let vols = [0.5, 0.6, 0.7, 0.8, 0.9];
        for i in 0..5 {
            cov[(i, i)] = vols[i] * vols[i];
        }
        cov[(0, 0)] = 1.0;
        let lv = quintile_targets(&cov, &vols).unwrap();
        assert!(lv.targets.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*lv.permutation.last().unwrap(), 0);
        assert!(lv.is_reordered());
    }
}
