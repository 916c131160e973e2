//! Maps between portfolio space and the computational sphere.
//!
//! Portfolios live on the canonical simplex `{x in R^n : x >= 0, sum x = 1}` and
//! a volatility level set is `{x : x' Σ x = c}`. Restricted to the affine hull of
//! the simplex the level set is an ellipsoid centred at the global minimum
//! variance portfolio `x_gmv`; an orthonormal hull basis followed by symmetric
//! whitening sends it to the unit sphere in `R^{n-1}` and sends the simplex to a
//! full-dimensional simplex `Δ`.
//!
//! The norm relation is `||y||^2 = (x' Σ x - c_min) / (c - c_min)` where
//! `c_min = x_gmv' Σ x_gmv`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::SimplexH;

const SYMMETRY_TOL: f64 = 1e-12;
const PD_RATIO: f64 = 1e-10;
const HULL_TOL: f64 = 1e-9;

/// `{x in R^n : x_i >= 0, sum x_i = 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalSimplex {
    pub n_assets: usize,
}

impl CanonicalSimplex {
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.n_assets && (x.sum() - 1.0).abs() <= tol && x.iter().all(|&v| v >= -tol)
    }

    pub fn barycenter(&self) -> DVector<f64> {
        DVector::from_element(self.n_assets, 1.0 / self.n_assets as f64)
    }
}

/// Validated covariance matrix and variance level.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityEllipsoid {
    covariance: DMatrix<f64>,
    level: f64,
}

impl VolatilityEllipsoid {
    pub fn new(covariance: DMatrix<f64>, level: f64) -> Result<Self> {
        check_spd(&covariance)?;
        if !(level > 0.0) || !level.is_finite() {
            return Err(Error::DegenerateLevel { level, min_variance: 0.0 });
        }
        Ok(Self { covariance, level })
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn level(&self) -> f64 {
        self.level
    }
}

/// Symmetry and positive-definiteness gate used for every covariance input.
pub fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    let scale = m.amax();
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale || !scale.is_finite() {
        return Err(Error::NotSymmetric(asym / scale.max(f64::MIN_POSITIVE)));
    }
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let (min_eig, max_eig) = (eig.min(), eig.max());
    if !(max_eig > 0.0) || min_eig <= PD_RATIO * max_eig {
        return Err(Error::NotPositiveDefinite { min_eig, max_eig });
    }
    Ok(())
}

/// Orthonormal rows spanning `{x : sum x = 0}` in `R^n`, from the Householder QR of
/// the direction matrix with columns `e_i - e_n`.
pub fn hull_basis(n: usize) -> DMatrix<f64> {
    assert!(n >= 2);
    let dirs = DMatrix::from_fn(n, n - 1, |i, j| {
        if i == j {
            1.0
        } else if i == n - 1 {
            -1.0
        } else {
            0.0
        }
    });
    dirs.qr().q().transpose()
}

/// Affine isometry plus whitening from portfolio space to the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TransformDoc", try_from = "TransformDoc")]
pub struct PatchTransform {
    basis: DMatrix<f64>,
    offset: DVector<f64>,
    whitening: DMatrix<f64>,
    level: f64,
    min_variance: f64,
    forward: DMatrix<f64>,
    backward: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct TransformDoc {
    basis: Vec<Vec<f64>>,
    offset: Vec<f64>,
    whitening: Vec<Vec<f64>>,
    level: f64,
    min_variance: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = r.len();
    let m = r.first().map_or(0, Vec::len);
    if r.iter().any(|row| row.len() != m) {
        return Err(Error::InvalidArgument("ragged matrix".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| r[i][j]))
}

impl From<PatchTransform> for TransformDoc {
    fn from(t: PatchTransform) -> Self {
        TransformDoc {
            basis: rows(&t.basis),
            offset: t.offset.iter().copied().collect(),
            whitening: rows(&t.whitening),
            level: t.level,
            min_variance: t.min_variance,
        }
    }
}

impl TryFrom<TransformDoc> for PatchTransform {
    type Error = Error;

    fn try_from(doc: TransformDoc) -> Result<Self> {
        let basis = from_rows(&doc.basis)?;
        let whitening = from_rows(&doc.whitening)?;
        let inverse =
            whitening.clone().try_inverse().ok_or_else(|| Error::InvalidArgument("singular whitening".into()))?;
        Ok(PatchTransform::assemble(
            basis,
            DVector::from_vec(doc.offset),
            whitening,
            &inverse,
            doc.level,
            doc.min_variance,
        ))
    }
}

impl PatchTransform {
    fn assemble(
        basis: DMatrix<f64>,
        offset: DVector<f64>,
        whitening: DMatrix<f64>,
        whitening_inv: &DMatrix<f64>,
        level: f64,
        min_variance: f64,
    ) -> Self {
        let forward = &whitening * &basis;
        let backward = basis.transpose() * whitening_inv;
        Self { basis, offset, whitening, level, min_variance, forward, backward }
    }

    /// Number of assets.
    pub fn n_assets(&self) -> usize {
        self.offset.len()
    }

    /// Dimension `d = n - 1` of the computational space.
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn whitening(&self) -> &DMatrix<f64> {
        &self.whitening
    }

    /// The minimum-variance portfolio (centre of the level-set ellipsoid).
    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn min_variance(&self) -> f64 {
        self.min_variance
    }

    /// Image of the long-only constraints: `A y <= b` iff `from_patch(y) >= 0`.
    pub fn simplex(&self) -> SimplexH {
        SimplexH::new(-&self.backward, self.offset.clone()).expect("transform rows are nonzero")
    }

    pub fn to_patch(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n_assets() {
            return Err(Error::DimensionMismatch { expected: self.n_assets(), got: x.len() });
        }
        let s = x.sum();
        if (s - 1.0).abs() > HULL_TOL {
            return Err(Error::OffSimplexAffineHull(s));
        }
        Ok(&self.forward * (x - &self.offset))
    }

    pub fn from_patch(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.offset + &self.backward * y
    }
}

/// Transform for the level set `{x : x' Σ x = c}` on the `n`-asset simplex.
pub fn build_transform(covariance: &DMatrix<f64>, level: f64, n_assets: usize) -> Result<PatchTransform> {
    if covariance.nrows() != n_assets {
        return Err(Error::DimensionMismatch { expected: n_assets, got: covariance.nrows() });
    }
    if n_assets < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 assets, got {n_assets}")));
    }
    let ellipsoid = VolatilityEllipsoid::new(covariance.clone(), level)?;
    let sigma = ellipsoid.covariance();

    let chol = sigma.clone().cholesky().ok_or(Error::NotPositiveDefinite { min_eig: 0.0, max_eig: 0.0 })?;
    let ones = DVector::from_element(n_assets, 1.0);
    let inv_ones = chol.solve(&ones);
    let min_variance = 1.0 / ones.dot(&inv_ones);
    let gmv = inv_ones * min_variance;

    let excess = level - min_variance;
    if !(excess > 1e-12 * level) {
        return Err(Error::DegenerateLevel { level, min_variance });
    }

    let basis = hull_basis(n_assets);
    let reduced = &basis * sigma * basis.transpose();
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);
    let u = &eig.eigenvectors;
    let sqrt_fwd = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| (l / excess).sqrt()));
    let sqrt_inv = sqrt_fwd.map(|s| 1.0 / s);
    let whitening = u * DMatrix::from_diagonal(&sqrt_fwd) * u.transpose();
    let whitening_inv = u * DMatrix::from_diagonal(&sqrt_inv) * u.transpose();

    Ok(PatchTransform::assemble(basis, gmv, whitening, &whitening_inv, level, min_variance))
}
