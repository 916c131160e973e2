//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use isovol::rng::Rng;
use isovol::{PatchBody, SimplexH};
use nalgebra::{dvector, DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(d: usize, rng: &mut Rng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| StandardNormal.sample(rng))
}

pub fn uniform_sphere(d: usize, rng: &mut Rng) -> DVector<f64> {
    loop {
        let g = gaussian(d, rng);
        let n = g.norm();
        if n > 1e-12 {
            return g / n;
        }
    }
}

/// Haar-random orthogonal matrix.
pub fn random_rotation(d: usize, rng: &mut Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Vertices of a regular simplex of circumradius `radius`, rotated, jittered and shifted.
pub fn perturbed_simplex(d: usize, radius: f64, jitter: f64, shift: f64, rng: &mut Rng) -> Vec<DVector<f64>> {
    let base = SimplexH::regular(d, radius).unwrap().vertices().unwrap();
    let rot = random_rotation(d, rng);
    let offset = gaussian(d, rng) * shift;
    base.iter().map(|v| &rot * v + gaussian(d, rng) * (jitter * radius) + &offset).collect()
}

/// Smallest facet slack divided by the normal norm; negative outside `Δ`.
pub fn facet_distance(simplex: &SimplexH, x: &DVector<f64>) -> f64 {
    let s = simplex.slack(x);
    (0..s.len()).map(|j| s[j] / simplex.normal_norms()[j]).fold(f64::INFINITY, f64::min)
}

/// Uniform points of `K` (or of one component) by rejection from the sphere.
pub fn rejection(body: &PatchBody, component: Option<usize>, n: usize, rng: &mut Rng) -> Vec<DVector<f64>> {
    let d = body.dim();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = uniform_sphere(d, rng);
        if facet_distance(&body.simplex, &x) <= 0.0 {
            continue;
        }
        match component {
            None => out.push(x),
            Some(c) => {
                if body.membership(&x).ok().flatten() == Some(c) {
                    out.push(x);
                }
            }
        }
    }
    out
}

/// Fraction of the sphere inside `Δ`, from `n` uniform draws.
pub fn inside_fraction(simplex: &SimplexH, n: usize, rng: &mut Rng) -> f64 {
    let d = simplex.dim();
    let hits = (0..n).filter(|_| facet_distance(simplex, &uniform_sphere(d, rng)) > 0.0).count();
    hits as f64 / n as f64
}

/// Histogram over the Voronoi cells of the reference directions.
pub fn voronoi_histogram(refs: &[DVector<f64>], points: &[DVector<f64>]) -> Vec<f64> {
    let mut h = vec![0.0; refs.len()];
    for p in points {
        let best = (0..refs.len()).max_by(|&a, &b| refs[a].dot(p).total_cmp(&refs[b].dot(p))).unwrap();
        h[best] += 1.0;
    }
    let n = points.len() as f64;
    h.iter_mut().for_each(|x| *x /= n);
    h
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Kolmogorov distribution tail `P(K > x)`.
fn kolmogorov_tail(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let s: f64 = (1..=100).map(|k| (-1f64).powi(k - 1) * (-2.0 * (k as f64 * x).powi(2)).exp()).sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_tail(lambda))
}

/// One-sample KS against a continuous CDF.
pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x = x.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    (d, kolmogorov_tail(lambda))
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Unnormalised density of `t = μ'x` under vMF(μ, α) on `S^{d-1}`, scaled by `e^{-α}`.
pub fn vmf_cosine_density(d: usize, alpha: f64) -> impl Fn(f64) -> f64 {
    move |t: f64| (alpha * (t - 1.0)).exp() * (1.0 - t * t).max(0.0).powf((d as f64 - 3.0) / 2.0)
}

/// `E[μ'x]` under vMF by quadrature (needs `d >= 3`).
pub fn vmf_mean_cosine(d: usize, alpha: f64) -> f64 {
    let f = vmf_cosine_density(d, alpha);
    let num = simpson(|t| t * f(t), -1.0, 1.0, 200_000);
    let den = simpson(&f, -1.0, 1.0, 200_000);
    num / den
}

/// `P(μ'x < 0)` under vMF by quadrature (needs `d >= 3`).
pub fn vmf_lower_hemisphere(d: usize, alpha: f64) -> f64 {
    let f = vmf_cosine_density(d, alpha);
    simpson(&f, -1.0, 0.0, 100_000) / simpson(&f, -1.0, 1.0, 200_000)
}

/// Whether the minor great-circle arc from `p` to `q` stays in `Δ`.
///
/// Along `x(θ) = cos θ p + sin θ u`, each facet value is `r cos(θ - φ)`, whose maximum
/// over `[0, Θ]` is at an endpoint or at `θ = φ`.
pub fn arc_inside(simplex: &SimplexH, p: &DVector<f64>, q: &DVector<f64>) -> bool {
    let c = p.dot(q).clamp(-1.0, 1.0);
    let big = c.acos();
    let w = q - p * c;
    let wn = w.norm();
    if wn < 1e-14 {
        return facet_distance(simplex, p) > 0.0;
    }
    let u = w / wn;
    let a = simplex.normals();
    let b = simplex.offsets();
    let ap = a * p;
    let au = a * &u;
    (0..b.len()).all(|j| {
        let phi = au[j].atan2(ap[j]);
        let r = ap[j].hypot(au[j]);
        let end = ap[j] * big.cos() + au[j] * big.sin();
        let peak = if phi >= 0.0 && phi <= big { r } else { f64::NEG_INFINITY };
        ap[j].max(end).max(peak) < b[j]
    })
}

/// Points of `K` spread over every component: uniform points of `Δ` outside the
/// ball, projected radially. Needs the origin inside `Δ`.
pub fn projected_points(vertices: &[DVector<f64>], n: usize, max_draws: usize, rng: &mut Rng) -> Vec<DVector<f64>> {
    let d = vertices[0].len();
    let mut out = Vec::with_capacity(n);
    for _ in 0..max_draws {
        if out.len() == n {
            break;
        }
        let e: Vec<f64> = (0..=d).map(|_| -rng.random::<f64>().ln()).collect();
        let s: f64 = e.iter().sum();
        let x = vertices.iter().zip(&e).fold(DVector::zeros(d), |acc, (v, w)| acc + v * (w / s));
        let r = x.norm();
        if r > 1.0 {
            out.push(x / r);
        }
    }
    out
}

/// Points of `K` near the outer parts of the simplex 1-skeleton: each vertex and
/// `per_edge` points along each edge, pulled slightly toward the centroid and
/// projected radially. Catches caps too small for [`projected_points`].
pub fn skeleton_points(vertices: &[DVector<f64>], per_edge: usize) -> Vec<DVector<f64>> {
    let d = vertices[0].len();
    let centroid = vertices.iter().fold(DVector::zeros(d), |a, v| a + v) / vertices.len() as f64;
    let pull = |x: DVector<f64>| -> Option<DVector<f64>> {
        let y = x * (1.0 - 1e-4) + &centroid * 1e-4;
        let r = y.norm();
        (r > 1.0 + 1e-9).then(|| y / r)
    };
    let mut out: Vec<DVector<f64>> = vertices.iter().filter_map(|v| pull(v.clone())).collect();
    for i in 0..vertices.len() {
        for j in (i + 1)..vertices.len() {
            for k in 1..per_edge {
                let t = k as f64 / per_edge as f64;
                out.extend(pull(&vertices[i] * (1.0 - t) + &vertices[j] * t));
            }
        }
    }
    out
}

/// Connected components of the geodesic graph on `points` (edges are arcs inside `Δ`).
pub fn cloud_components(simplex: &SimplexH, points: &[DVector<f64>]) -> Vec<usize> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj && arc_inside(simplex, &points[i], &points[j]) {
                parent[ri] = rj;
            }
        }
    }
    let mut root_label = std::collections::HashMap::new();
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            let next = root_label.len();
            *root_label.entry(r).or_insert(next)
        })
        .collect()
}

/// Whether two labelings induce the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut ab = std::collections::HashMap::new();
    let mut ba = std::collections::HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x)
}

/// A connected test body in dimension `d` whose patch covers at least `min_fraction`
/// of the sphere, with a visibly non-trivial boundary.
pub fn single_component_body(d: usize, min_fraction: f64, rng: &mut Rng) -> PatchBody {
    loop {
        let radius = d as f64 * rng.random_range(0.5..1.1);
        let verts = perturbed_simplex(d, radius, 0.1, 0.3, rng);
        let Ok(simplex) = SimplexH::from_vertices(&verts) else { continue };
        let Ok(body) = PatchBody::new(simplex) else { continue };
        if body.n_components() != 1 {
            continue;
        }
        let f = inside_fraction(&body.simplex, 20_000, rng);
        if f > min_fraction && f < 0.95 {
            return body;
        }
    }
}

/// The circle arc `{θ : |θ| < half}` of `S^1` cut out by a triangle.
pub fn arc_body(length: f64) -> PatchBody {
    let h = (length / 2.0).cos();
    // x_1 >= cos(L/2) plus two far facets.
    let a = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 1.0, 3.0, 1.0, -3.0]);
    PatchBody::new(SimplexH::new(a, DVector::from_vec(vec![-h, 30.0, 30.0])).unwrap()).unwrap()
}

/// A simplex containing the whole unit ball.
pub fn whole_sphere_body(d: usize) -> PatchBody {
    PatchBody::new(SimplexH::regular(d, 4.0 * d as f64).unwrap()).unwrap()
}

/// The hemisphere `x_1 > 0` of `S^{d-1}`: the half-space `x_1 >= 0` cut by a wide cone.
pub fn hemisphere_body(d: usize) -> PatchBody {
    let spokes = SimplexH::regular(d - 1, 1.0).unwrap().vertices().unwrap();
    let mut a = DMatrix::zeros(d + 1, d);
    a[(0, 0)] = -1.0;
    for (k, w) in spokes.iter().enumerate() {
        a[(k + 1, 0)] = 1.0;
        for i in 0..d - 1 {
            a[(k + 1, i + 1)] = w[i];
        }
    }
    let mut b = DVector::from_element(d + 1, 10.0);
    b[0] = 0.0;
    PatchBody::new(SimplexH::new(a, b).unwrap()).unwrap()
}

/// Random simplex containing the origin, with radius spread across the
/// empty, capped, perforated and whole-sphere regimes.
pub fn random_simplex_around_origin(d: usize, rng: &mut Rng) -> (Vec<DVector<f64>>, SimplexH) {
    loop {
        let radius = (rng.random_range(0.8f64.ln()..(1.3 * d as f64).ln())).exp();
        let verts = perturbed_simplex(d, radius, 0.15, 0.1 * radius / d as f64, rng);
        let Ok(s) = SimplexH::from_vertices(&verts) else { continue };
        if facet_distance(&s, &DVector::zeros(d)) > 0.0 {
            return (verts, s);
        }
    }
}

/// Random points of `K` plus points along the outer 1-skeleton, away from `∂Δ`.
pub fn component_cloud(verts: &[DVector<f64>], simplex: &SimplexH, rng: &mut Rng) -> Vec<DVector<f64>> {
    let mut points = projected_points(verts, 1200, 200_000, rng);
    points.extend(skeleton_points(verts, 30));
    points.retain(|p| facet_distance(simplex, p) > 1e-8);
    points
}

/// Flood fill over a latitude-longitude grid of about 10^6 cells.
///
/// Cells within one grid spacing outside `Δ` take part in the fill, so that cells
/// in a sharp corner are not cut off from their component; only cells whose
/// centre is inside receive a label.
pub fn grid_labels(simplex: &SimplexH, n_lat: usize, n_lon: usize) -> (Vec<Option<usize>>, Vec<DVector<f64>>) {
    let cell = |i: usize, j: usize| {
        let th = std::f64::consts::PI * (i as f64 + 0.5) / n_lat as f64;
        let ph = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n_lon as f64;
        dvector![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
    };
    let centers: Vec<DVector<f64>> = (0..n_lat).flat_map(|i| (0..n_lon).map(move |j| cell(i, j))).collect();
    let spacing = std::f64::consts::PI / n_lat as f64;
    let near: Vec<bool> = centers.iter().map(|c| facet_distance(simplex, c) > -spacing).collect();
    let mut labels: Vec<Option<usize>> = vec![None; centers.len()];
    let mut next = 0;
    for start in 0..centers.len() {
        if facet_distance(simplex, &centers[start]) <= 0.0 || labels[start].is_some() {
            continue;
        }
        labels[start] = Some(next);
        let mut stack = vec![start];
        while let Some(k) = stack.pop() {
            let (i, j) = (k / n_lon, k % n_lon);
            // Eight-neighbourhood, wrapping in longitude.
            let mut nbrs = Vec::with_capacity(8);
            for ii in i.saturating_sub(1)..=(i + 1).min(n_lat - 1) {
                for dj in [n_lon - 1, 0, 1] {
                    nbrs.push(ii * n_lon + (j + dj) % n_lon);
                }
            }
            // Rows next to a pole all touch each other.
            if i == 0 || i + 1 == n_lat {
                nbrs.extend((0..n_lon).map(|jj| i * n_lon + jj));
            }
            for nb in nbrs {
                if near[nb] && labels[nb].is_none() {
                    labels[nb] = Some(next);
                    stack.push(nb);
                }
            }
        }
        next += 1;
    }
    for (l, c) in labels.iter_mut().zip(&centers) {
        if facet_distance(simplex, c) <= 0.0 {
            *l = None;
        }
    }
    (labels, centers)
}

/// `P(Binomial(n, p) < k)`.
pub fn binomial_below(n: usize, p: f64, k: f64) -> f64 {
    let mut term = (1.0 - p).powi(n as i32);
    let mut total = 0.0;
    for i in 0..=n {
        if i as f64 >= k {
            break;
        }
        total += term;
        term *= (n - i) as f64 / (i + 1) as f64 * p / (1.0 - p);
    }
    total.clamp(0.0, 1.0)
}
