//! Connected components of `K = S^{d-1} ∩ Δ`.
//!
//! Components of `K` are in bijection with the connected components of the
//! simplex 1-skeleton after removing vertices strictly inside the unit ball and
//! edges that cross the sphere. The graph also drives an `O(d^2)` membership
//! oracle and the choice of one starting point per component.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{min_norm_point, segment_sphere_intersects, SimplexH};

/// Distance to `∂Δ` below which a point is reported as numerically on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Vertices with `|v|^2 - 1` at most this far from zero count as lying on the sphere.
pub const ON_SPHERE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentGraph {
    /// Whether each simplex vertex survives (is not strictly inside the unit ball).
    pub kept: Vec<bool>,
    /// Surviving edges `(i, j)`, `i < j`.
    pub edges: Vec<(usize, usize)>,
    /// Component label per vertex; `None` for removed vertices.
    pub labels: Vec<Option<usize>>,
    /// Number of components of `K`.
    pub n_components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: usize,
    pub vertices: Vec<usize>,
    pub start: DVector<f64>,
    pub relative_volume: Option<f64>,
}

/// `K = S^{d-1} ∩ Δ` with its component structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchBody {
    pub simplex: SimplexH,
    pub vertices: Vec<DVector<f64>>,
    pub graph: ComponentGraph,
    pub components: Vec<Component>,
    /// Largest ball inside `Δ ∩ B_d`, when that set has interior.
    pub inscribed: Option<(DVector<f64>, f64)>,
}

/// Build the pruned 1-skeleton and label its components.
///
/// `M = 0` is reported both when every vertex lies inside the ball and when
/// the simplex misses the ball entirely.
pub fn build_component_graph(simplex: &SimplexH) -> Result<ComponentGraph> {
    let vertices = simplex.vertices()?;
    Ok(graph_from_vertices(&vertices))
}

fn graph_from_vertices(vertices: &[DVector<f64>]) -> ComponentGraph {
    let n = vertices.len();
    let kept: Vec<bool> = vertices.iter().map(|v| v.norm_squared() >= 1.0).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if kept[i] && kept[j] && !segment_sphere_intersects(&vertices[i], &vertices[j]) {
                edges.push((i, j));
            }
        }
    }

    let misses_ball = kept.iter().all(|&k| k) && min_norm_point(vertices).0.norm_squared() > 1.0;
    let mut labels = vec![None; n];
    let mut n_components = 0;
    if !misses_ball {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(i, j) in &edges {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
        // A group whose vertices all sit on the sphere (up to rounding) meets it in
        // isolated points: every edge leaving such a vertex points into the ball.
        let mut reaches_out = vec![false; n];
        for i in 0..n {
            if kept[i] && vertices[i].norm_squared() > 1.0 + ON_SPHERE_TOL {
                let r = find(&mut parent, i);
                reaches_out[r] = true;
            }
        }
        let mut root_label = vec![None; n];
        for i in 0..n {
            if !kept[i] {
                continue;
            }
            let r = find(&mut parent, i);
            if !reaches_out[r] {
                continue;
            }
            let label = *root_label[r].get_or_insert_with(|| {
                n_components += 1;
                n_components - 1
            });
            labels[i] = Some(label);
        }
    }
    ComponentGraph { kept, edges, labels, n_components }
}

/// Component of `K` containing the unit vector `p`, or `None` if `p ∉ Δ`.
///
/// Shoots the ray from the origin through `p` to its exit point `q` on `∂Δ`
/// and returns the label of the first exit-facet vertex visible from `q`.
pub fn membership(
    p: &DVector<f64>,
    graph: &ComponentGraph,
    simplex: &SimplexH,
    vertices: &[DVector<f64>],
) -> Result<Option<usize>> {
    let ap = simplex.normals() * p;
    let b = simplex.offsets();
    let norms = simplex.normal_norms();
    let mut min_dist = f64::INFINITY;
    for j in 0..ap.len() {
        min_dist = min_dist.min((b[j] - ap[j]) / norms[j]);
    }
    if min_dist < -BOUNDARY_TOL {
        return Ok(None);
    }
    if min_dist <= BOUNDARY_TOL {
        return Err(Error::NumericallyOnBoundary);
    }
    if graph.n_components == 0 {
        return Ok(None);
    }
    if graph.n_components == 1 {
        return Ok(Some(0));
    }

    // Exit facet of the ray t p, t >= 1; lowest index wins ties.
    let mut exit = None;
    let mut t_exit = f64::INFINITY;
    for j in 0..ap.len() {
        if ap[j] > 0.0 {
            let t = b[j] / ap[j];
            if t < t_exit {
                t_exit = t;
                exit = Some(j);
            }
        }
    }
    let exit = exit.ok_or(Error::NumericallyOnBoundary)?;
    let q = p * t_exit;

    let visible = |u: usize| graph.labels[u].filter(|_| !segment_sphere_intersects(&q, &vertices[u]));
    // Vertices of the exit facet are all vertices except the one opposite it.
    if let Some(label) = (0..vertices.len()).filter(|&u| u != exit).find_map(visible) {
        return Ok(Some(label));
    }
    // Ridge or near-tangent exit: any visible vertex of Δ certifies the component.
    visible(exit).map(Some).ok_or(Error::NumericallyOnBoundary)
}

/// Largest ball `B(x_c, r)` inside `Δ ∩ B_d`.
///
/// Solved by bisection on `r`: for a simplex, tightening every facet by `r ||a_j||`
/// is the homothety about the incenter with ratio `1 - r / inradius`, so each
/// feasibility check is a minimum-norm-point query on the shrunken vertices.
pub fn inscribed_ball(simplex: &SimplexH) -> Result<(DVector<f64>, f64)> {
    let (center, inradius) = simplex.incenter()?;
    let vertices = simplex.vertices()?;
    let shrunk_min_norm = |r: f64| {
        let ratio = 1.0 - r / inradius;
        let pts: Vec<DVector<f64>> = vertices.iter().map(|v| &center + (v - &center) * ratio).collect();
        min_norm_point(&pts).0
    };
    let feasible = |r: f64| shrunk_min_norm(r).norm() <= 1.0 - r;

    if !feasible(0.0) || shrunk_min_norm(0.0).norm() >= 1.0 {
        return Err(Error::EmptyIntersection);
    }
    let hi = inradius.min(1.0);
    // The unit ball centered at the origin fits inside Δ.
    if simplex.slack(&DVector::zeros(simplex.dim())).iter().zip(simplex.normal_norms().iter()).all(|(s, n)| *s >= *n) {
        return Ok((DVector::zeros(simplex.dim()), 1.0));
    }
    if feasible(hi) {
        return Ok((shrunk_min_norm(hi), hi));
    }
    let (mut lo, mut hi) = (0.0, hi);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !(lo > 0.0) {
        return Err(Error::EmptyIntersection);
    }
    Ok((shrunk_min_norm(lo), lo))
}

/// Point of `S^{d-1}` on the segment from `center` (inside the ball and Δ) to the vertex.
pub fn sphere_crossing(vertex: &DVector<f64>, center: &DVector<f64>) -> Option<DVector<f64>> {
    let vn = vertex.norm();
    if (vn - 1.0).abs() < 1e-12 {
        return Some(vertex.clone());
    }
    let dir = vertex - center;
    let a = dir.norm_squared();
    let b = center.dot(&dir);
    let c = center.norm_squared() - 1.0;
    if a == 0.0 || c >= 0.0 {
        return None;
    }
    let t = (-b + (b * b - a * c).sqrt()) / a;
    if !(0.0..=1.0 + 1e-12).contains(&t) {
        return None;
    }
    let p = center + dir * t;
    let n = p.norm();
    Some(p / n)
}

/// A unit vector inside the given component.
pub fn starting_point(
    component_vertices: &[usize],
    label: usize,
    center: &DVector<f64>,
    graph: &ComponentGraph,
    simplex: &SimplexH,
    vertices: &[DVector<f64>],
) -> Result<DVector<f64>> {
    let mut last_err = Error::NoCrossing(component_vertices.first().copied().unwrap_or(0));
    for &v in component_vertices {
        let Some(p) = sphere_crossing(&vertices[v], center) else {
            last_err = Error::NoCrossing(v);
            continue;
        };
        match membership(&p, graph, simplex, vertices) {
            Ok(Some(l)) if l == label => return Ok(p),
            Err(Error::NumericallyOnBoundary) if (vertices[v].norm() - 1.0).abs() < 1e-12 => return Ok(p),
            Ok(_) => last_err = Error::NoCrossing(v),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

impl PatchBody {
    pub fn new(simplex: SimplexH) -> Result<Self> {
        let vertices = simplex.vertices()?;
        let mut graph = graph_from_vertices(&vertices);
        let inscribed = if graph.n_components > 0 {
            match inscribed_ball(&simplex) {
                Ok(ball) => Some(ball),
                // Tangential contact only: treat K as empty.
                Err(Error::EmptyIntersection) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        if inscribed.is_none() {
            graph.n_components = 0;
            graph.labels.iter_mut().for_each(|l| *l = None);
        }
        let mut components = Vec::with_capacity(graph.n_components);
        if let Some((center, _)) = &inscribed {
            for id in 0..graph.n_components {
                let members: Vec<usize> = (0..vertices.len()).filter(|&v| graph.labels[v] == Some(id)).collect();
                let start = starting_point(&members, id, center, &graph, &simplex, &vertices)?;
                components.push(Component { id, vertices: members, start, relative_volume: None });
            }
        }
        if components.len() == 1 {
            components[0].relative_volume = Some(1.0);
        }
        Ok(Self { simplex, vertices, graph, components, inscribed })
    }

    pub fn dim(&self) -> usize {
        self.simplex.dim()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn membership(&self, p: &DVector<f64>) -> Result<Option<usize>> {
        membership(p, &self.graph, &self.simplex, &self.vertices)
    }

    /// Cached relative volumes, when every component has one.
    pub fn weights(&self) -> Option<Vec<f64>> {
        self.components.iter().map(|c| c.relative_volume).collect()
    }

    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.components.len() {
            return Err(Error::DimensionMismatch { expected: self.components.len(), got: weights.len() });
        }
        for (c, &w) in self.components.iter_mut().zip(weights) {
            c.relative_volume = Some(w);
        }
        Ok(())
    }

    /// JSON summary of the components.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "dimension": self.dim(),
            "n_components": self.n_components(),
            "inscribed_ball": self.inscribed.as_ref().map(|(c, r)| serde_json::json!({
                "center": c.iter().collect::<Vec<_>>(),
                "radius": r,
            })),
            "components": self.components.iter().map(|c| serde_json::json!({
                "id": c.id,
                "vertices": c.vertices,
                "start": c.start.iter().collect::<Vec<_>>(),
                "relative_volume": c.relative_volume,
            })).collect::<Vec<_>>(),
        })
    }
}
