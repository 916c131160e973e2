//! Full-dimensional simplices in half-space form and the small amount of
//! polytope machinery the patch code needs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A full-dimensional simplex `{x : A x <= b}` in `R^d` with exactly `d + 1` facets.
///
/// Vertex `i` is the vertex opposite facet `i`: it satisfies every facet
/// equation except the `i`-th.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SimplexDoc", into = "SimplexDoc")]
pub struct SimplexH {
    normals: DMatrix<f64>,
    offsets: DVector<f64>,
    norms: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct SimplexDoc {
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl TryFrom<SimplexDoc> for SimplexH {
    type Error = Error;

    fn try_from(doc: SimplexDoc) -> Result<Self> {
        let rows = doc.normals.len();
        let cols = doc.normals.first().map_or(0, Vec::len);
        if doc.normals.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged normals".into()));
        }
        let normals = DMatrix::from_fn(rows, cols, |i, j| doc.normals[i][j]);
        SimplexH::new(normals, DVector::from_vec(doc.offsets))
    }
}

impl From<SimplexH> for SimplexDoc {
    fn from(s: SimplexH) -> Self {
        SimplexDoc {
            normals: s.normals.row_iter().map(|r| r.iter().copied().collect()).collect(),
            offsets: s.offsets.iter().copied().collect(),
        }
    }
}

impl SimplexH {
    pub fn new(normals: DMatrix<f64>, offsets: DVector<f64>) -> Result<Self> {
        let d = normals.ncols();
        if d < 1 || normals.nrows() != d + 1 {
            return Err(Error::DimensionMismatch { expected: d + 1, got: normals.nrows() });
        }
        if offsets.len() != d + 1 {
            return Err(Error::DimensionMismatch { expected: d + 1, got: offsets.len() });
        }
        let norms = DVector::from_iterator(d + 1, normals.row_iter().map(|r| r.norm()));
        if norms.iter().any(|&n| !(n > 0.0) || !n.is_finite()) {
            return Err(Error::DegenerateSimplex("zero or non-finite facet normal".into()));
        }
        Ok(Self { normals, offsets, norms })
    }

    /// Simplex with the given vertices (`d + 1` points in `R^d`).
    pub fn from_vertices(vertices: &[DVector<f64>]) -> Result<Self> {
        let n = vertices.len();
        if n < 2 {
            return Err(Error::DegenerateSimplex("need at least two vertices".into()));
        }
        let d = vertices[0].len();
        if n != d + 1 {
            return Err(Error::DimensionMismatch { expected: d + 1, got: n });
        }
        // Facet i passes through every vertex except i. Homogeneous coordinates:
        // [V^T 1] has inverse whose rows give the barycentric maps lambda_i(x) = g_i^T x + h_i,
        // and facet i is lambda_i(x) >= 0.
        let mut m = DMatrix::zeros(n, n);
        for (j, v) in vertices.iter().enumerate() {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.len() });
            }
            m.view_mut((0, j), (d, 1)).copy_from(v);
            m[(d, j)] = 1.0;
        }
        let inv = m.try_inverse().ok_or_else(|| Error::DegenerateSimplex("affinely dependent vertices".into()))?;
        let normals = -inv.columns(0, d).into_owned();
        let offsets = inv.column(d).into_owned();
        Self::new(normals, offsets)
    }

    /// `{x : x_i >= 0, sum x_i <= 1}` in `R^d`, facets ordered `x_1 .. x_d` then the sum.
    pub fn standard(d: usize) -> Self {
        let mut a = DMatrix::zeros(d + 1, d);
        for i in 0..d {
            a[(i, i)] = -1.0;
            a[(d, i)] = 1.0;
        }
        let mut b = DVector::zeros(d + 1);
        b[d] = 1.0;
        Self::new(a, b).expect("standard simplex")
    }

    /// Regular simplex centred at the origin with circumradius `radius`.
    pub fn regular(d: usize, radius: f64) -> Result<Self> {
        if d < 1 || !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regular simplex needs d >= 1 and radius > 0, got {d}, {radius}"
            )));
        }
        let basis = crate::geometry::hull_basis(d + 1);
        let scale = radius / (d as f64 / (d as f64 + 1.0)).sqrt();
        let vertices: Vec<DVector<f64>> = (0..=d)
            .map(|i| {
                let mut e = DVector::from_element(d + 1, -1.0 / (d as f64 + 1.0));
                e[i] += 1.0;
                &basis * e * scale
            })
            .collect();
        Self::from_vertices(&vertices)
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    pub fn n_facets(&self) -> usize {
        self.normals.nrows()
    }

    pub fn normals(&self) -> &DMatrix<f64> {
        &self.normals
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    /// Euclidean norms of the facet normals.
    pub fn normal_norms(&self) -> &DVector<f64> {
        &self.norms
    }

    pub fn normal(&self, j: usize) -> DVector<f64> {
        self.normals.row(j).transpose()
    }

    /// Same simplex with every offset multiplied by `s` (a homothety about the origin).
    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.normals.clone(), &self.offsets * s).expect("scaling keeps normals")
    }

    /// Same simplex with every offset replaced by `b_j + shift_j`.
    pub fn with_offsets(&self, offsets: DVector<f64>) -> Result<Self> {
        Self::new(self.normals.clone(), offsets)
    }

    /// Slack `b - A x` per facet.
    pub fn slack(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.offsets - &self.normals * x
    }

    /// Whether `A x <= b + tol * ||a_j||` for every facet.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        let s = self.slack(x);
        s.iter().zip(self.norms.iter()).all(|(&s, &n)| s >= -tol * n)
    }

    /// Smallest signed Euclidean distance to a facet hyperplane (negative outside).
    pub fn boundary_distance(&self, x: &DVector<f64>) -> f64 {
        let s = self.slack(x);
        s.iter().zip(self.norms.iter()).map(|(&s, &n)| s / n).fold(f64::INFINITY, f64::min)
    }

    /// The `d + 1` vertices, vertex `i` opposite facet `i`.
    pub fn vertices(&self) -> Result<Vec<DVector<f64>>> {
        let d = self.dim();
        let n = d + 1;
        // [A | -b] [v_i; 1] = -s_i e_i, so [v_i; 1] is a scaled column of the inverse.
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (n, d)).copy_from(&self.normals);
        m.set_column(d, &(-&self.offsets));
        let scale = m.amax().max(1.0);
        let inv = m.clone().try_inverse().ok_or_else(|| Error::DegenerateSimplex("singular facet system".into()))?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let col = inv.column(i);
            let h = col[d];
            if h.abs() < 1e-14 * col.amax().max(1e-300) {
                return Err(Error::DegenerateSimplex(format!("vertex {i} at infinity")));
            }
            let v: DVector<f64> = col.rows(0, d) / h;
            let slack = self.slack(&v);
            for (j, &s) in slack.iter().enumerate() {
                let tol = 1e-8 * scale * (1.0 + v.amax());
                if j == i {
                    if s <= tol {
                        return Err(Error::DegenerateSimplex(format!(
                            "facet {i} is not strictly satisfied at its opposite vertex"
                        )));
                    }
                } else if s.abs() > tol {
                    return Err(Error::DegenerateSimplex(format!("vertex {i} misses facet {j}")));
                }
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Incenter and inradius: the largest ball inside the simplex.
    pub fn incenter(&self) -> Result<(DVector<f64>, f64)> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d + 1, d + 1);
        m.view_mut((0, 0), (d + 1, d)).copy_from(&self.normals);
        m.set_column(d, &self.norms);
        let sol =
            m.lu().solve(&self.offsets).ok_or_else(|| Error::DegenerateSimplex("singular incenter system".into()))?;
        let r = sol[d];
        if !(r > 0.0) {
            return Err(Error::DegenerateSimplex("empty interior".into()));
        }
        Ok((sol.rows(0, d).into_owned(), r))
    }
}

/// Whether the closed segment `[u, w]` contains a point of unit norm.
pub fn segment_sphere_intersects(u: &DVector<f64>, w: &DVector<f64>) -> bool {
    let dir = w - u;
    let a = dir.norm_squared();
    let f0 = u.norm_squared() - 1.0;
    let f1 = w.norm_squared() - 1.0;
    if f0.max(f1) < 0.0 {
        return false;
    }
    if f0.min(f1) <= 0.0 {
        return true;
    }
    if a == 0.0 {
        return false;
    }
    // Both ends outside: crossing iff the closest point is inside or on the sphere.
    let t = (-u.dot(&dir) / a).clamp(0.0, 1.0);
    (u + dir * t).norm_squared() <= 1.0
}

/// Minimum-norm point of the convex hull of `points` (Wolfe's algorithm).
/// Returns the point together with its barycentric weights.
pub fn min_norm_point(points: &[DVector<f64>]) -> (DVector<f64>, Vec<f64>) {
    assert!(!points.is_empty());
    let n = points.len();
    let scale = points.iter().map(|p| p.norm_squared()).fold(0.0, f64::max).max(1e-300);
    let eps = 1e-12;

    let first = (0..n).min_by(|&i, &j| points[i].norm_squared().total_cmp(&points[j].norm_squared())).unwrap();
    let mut support = vec![first];
    let mut lambda = vec![1.0];
    let mut x = points[first].clone();

    for _ in 0..(50 * n + 100) {
        let (j, best) = (0..n).map(|j| (j, x.dot(&points[j]))).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        if x.norm_squared() - best <= eps * scale || support.contains(&j) {
            break;
        }
        support.push(j);
        lambda.push(0.0);

        loop {
            let mu = affine_min_norm(points, &support);
            if mu.iter().all(|&m| m > eps) {
                lambda = mu;
                break;
            }
            let mut theta = 1.0_f64;
            for (l, m) in lambda.iter().zip(&mu) {
                if *m <= eps {
                    let denom = l - m;
                    if denom > 0.0 {
                        theta = theta.min(l / denom);
                    }
                }
            }
            for (l, m) in lambda.iter_mut().zip(&mu) {
                *l = theta * m + (1.0 - theta) * *l;
            }
            let mut k = 0;
            while k < support.len() {
                if lambda[k] <= eps {
                    support.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            if support.len() == 1 {
                lambda = vec![1.0];
                break;
            }
        }
        let total: f64 = lambda.iter().sum();
        lambda.iter_mut().for_each(|l| *l /= total);
        x = support.iter().zip(&lambda).fold(DVector::zeros(points[0].len()), |acc, (&i, &l)| acc + &points[i] * l);
    }

    let mut weights = vec![0.0; n];
    for (&i, &l) in support.iter().zip(&lambda) {
        weights[i] = l;
    }
    (x, weights)
}

/// Affine weights (summing to one) of the minimum-norm point of the affine hull of a support set.
fn affine_min_norm(points: &[DVector<f64>], support: &[usize]) -> Vec<f64> {
    let k = support.len();
    let mut m = DMatrix::zeros(k + 1, k + 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            m[(a, b)] = points[i].dot(&points[j]);
        }
        m[(a, k)] = 1.0;
        m[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    match m.clone().lu().solve(&rhs) {
        Some(sol) if sol.iter().all(|v| v.is_finite()) => sol.rows(0, k).iter().copied().collect(),
        _ => {
            // Affinely dependent support: fall back to the pseudo-inverse solution.
            let svd = m.svd(true, true);
            let sol = svd.solve(&rhs, 1e-12).expect("svd solve");
            sol.rows(0, k).iter().copied().collect()
        }
    }
}
