//! Geometric random walks on a component of `K = S^{d-1} ∩ Δ`.
//!
//! Both walks move along great circles `ℓ(θ) = p cos θ + v sin θ` through the
//! current point. The great cycle walk resamples a point on the arc of `ℓ ∩ Δ`
//! containing `p` according to a one-dimensional target; the reflective walk
//! travels an exponentially distributed geodesic length and reflects
//! specularly at the facets of `Δ`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::simplex::SimplexH;
use crate::topology::PatchBody;

/// Roots this close to the anchor count as the anchor's own boundary contact.
const ANCHOR_EPS: f64 = 1e-12;
/// Residual above which an intersection candidate is rejected.
const ROOT_RESIDUAL: f64 = 1e-8;
/// Slack below which a walk point is considered outside the simplex.
const INVARIANT_TOL: f64 = 1e-9;

/// Sub-arc `[lower, upper]` of the great circle through `anchor` with tangent `tangent`.
///
/// `lower ∈ [-2π, 0]`, `upper ∈ [0, 2π]` and `upper - lower <= 2π`; arcs longer
/// than half a circle keep their orientation rather than wrapping.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcInterval {
    pub anchor: DVector<f64>,
    pub tangent: DVector<f64>,
    pub lower: f64,
    pub upper: f64,
    /// No facet crosses the circle; the arc is the whole circle `[-π, π]`.
    pub full_circle: bool,
}

impl ArcInterval {
    pub fn point(&self, theta: f64) -> DVector<f64> {
        &self.anchor * theta.cos() + &self.tangent * theta.sin()
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Uniformly distributed unit vector orthogonal to the unit vector `p`.
pub fn random_tangent(p: &DVector<f64>, rng: &mut Rng) -> DVector<f64> {
    let d = p.len();
    loop {
        let u = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(rng));
        let proj = &u - p * p.dot(&u);
        let n = proj.norm();
        if n > 1e-12 * u.norm() {
            let proj = &proj - p * p.dot(&proj);
            return &proj / proj.norm();
        }
    }
}

/// `(I - q q^T) a` normalised, the direction of `a` within the tangent space at `q`.
pub fn tangent_projection(q: &DVector<f64>, a: &DVector<f64>) -> Option<DVector<f64>> {
    let proj = a - q * q.dot(a);
    let n = proj.norm();
    if n < 1e-12 * a.norm() {
        return None;
    }
    // Second pass: cancellation leaves a normal component of order eps |a| / n.
    let proj = &proj - q * q.dot(&proj);
    Some(&proj / proj.norm())
}

/// Unvalidated `(exit, entry)` angles of the circle with facet `a^T x = b`
/// given `a^T p`, `a^T v`.
///
/// `exit ∈ [0, 2π)` is the first forward angle at which the circle leaves the
/// half-space and `entry ∈ [-2π, 0)` the first backward one. `None` when the
/// circle does not cross the hyperplane.
#[inline]
fn raw_roots(ap: f64, av: f64, b: f64) -> Option<(f64, f64)> {
    let r2 = ap * ap + av * av;
    if !(b * b < r2) {
        return None;
    }
    let phase = av.atan2(ap);
    let half = (b / r2.sqrt()).clamp(-1.0, 1.0).acos();
    // phase ∈ [-π, π] and half ∈ [0, π].
    let mut exit = phase - half;
    if exit < 0.0 {
        exit += TAU;
    }
    if exit > TAU - ANCHOR_EPS || exit >= TAU {
        exit = 0.0;
    }
    let mut entry = phase + half;
    if entry < 0.0 {
        entry += TAU;
    } else if entry >= TAU {
        entry -= TAU;
    }
    if entry < ANCHOR_EPS {
        entry = 0.0;
    } else {
        entry -= TAU;
    }
    Some((exit, entry))
}

#[inline]
fn root_ok(ap: f64, av: f64, b: f64, t: f64) -> bool {
    let tol = ROOT_RESIDUAL * (ap.hypot(av) + b.abs()).max(1.0);
    (ap * t.cos() + av * t.sin() - b).abs() <= tol
}

/// Facet roots whose endpoint residuals pass the validation tolerance.
fn facet_roots(ap: f64, av: f64, b: f64) -> Option<(f64, f64)> {
    raw_roots(ap, av, b).filter(|&(exit, entry)| root_ok(ap, av, b, exit) && root_ok(ap, av, b, entry))
}

/// `(lower, upper, full_circle)` of the arc through the anchor.
fn arc_bounds(ap: &DVector<f64>, av: &DVector<f64>, b: &DVector<f64>) -> (f64, f64, bool) {
    // Validating only the binding facets is equivalent to validating all of
    // them unless a binding root fails, in which case every root is checked.
    let mut upper = (f64::INFINITY, usize::MAX);
    let mut lower = (f64::NEG_INFINITY, usize::MAX);
    for j in 0..b.len() {
        // |d/dθ a^T ℓ(θ)| <= |(a^T p, a^T v)|, so no root is closer than slack / r.
        let reach = (b[j] - ap[j]) / ap[j].hypot(av[j]);
        if reach >= upper.0 && reach >= -lower.0 {
            continue;
        }
        if let Some((exit, entry)) = raw_roots(ap[j], av[j], b[j]) {
            if exit < upper.0 {
                upper = (exit, j);
            }
            if entry > lower.0 {
                lower = (entry, j);
            }
        }
    }
    let valid = |(_, j): (f64, usize)| j == usize::MAX || facet_roots(ap[j], av[j], b[j]).is_some();
    let (upper, lower) = if valid(upper) && valid(lower) {
        (upper.0, lower.0)
    } else {
        let mut bounds = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..b.len() {
            if let Some((exit, entry)) = facet_roots(ap[j], av[j], b[j]) {
                bounds = (bounds.0.min(exit), bounds.1.max(entry));
            }
        }
        bounds
    };
    if upper.is_infinite() {
        (-PI, PI, true)
    } else {
        (lower, upper, false)
    }
}

fn arc_from_products(
    anchor: &DVector<f64>,
    tangent: &DVector<f64>,
    ap: &DVector<f64>,
    av: &DVector<f64>,
    b: &DVector<f64>,
) -> ArcInterval {
    let (lower, upper, full_circle) = arc_bounds(ap, av, b);
    ArcInterval { anchor: anchor.clone(), tangent: tangent.clone(), lower, upper, full_circle }
}

/// The arc of `ℓ ∩ Δ` containing the anchor.
pub fn arc_in_simplex(p: &DVector<f64>, v: &DVector<f64>, simplex: &SimplexH) -> Result<ArcInterval> {
    let ap = simplex.normals() * p;
    let b = simplex.offsets();
    let norms = simplex.normal_norms();
    if (0..b.len()).any(|j| b[j] - ap[j] < -INVARIANT_TOL * norms[j]) {
        return Err(Error::AnchorOutsideSimplex);
    }
    let av = simplex.normals() * v;
    Ok(arc_from_products(p, v, &ap, &av, b))
}

pub fn uniform_arc_sample(arc: &ArcInterval, rng: &mut Rng) -> f64 {
    if arc.upper <= arc.lower {
        return arc.lower;
    }
    rng.random_range(arc.lower..=arc.upper)
}

/// Number of Metropolis–Hastings steps per arc draw.
pub const MH_WALK_LENGTH: usize = 10;

/// Metropolis–Hastings draw from `θ ↦ exp(α (μ^T p cos θ + μ^T v sin θ))` on the arc.
///
/// Proposals are uniform on a window of a third of the arc length centred at
/// the current angle and clipped to the arc; the acceptance ratio carries the
/// clipped window lengths so the chain stays reversible near the ends.
pub fn mh_arc_sample(
    arc: &ArcInterval,
    mu: &DVector<f64>,
    alpha: f64,
    current: f64,
    steps: usize,
    rng: &mut Rng,
) -> f64 {
    let (mp, mv) = (mu.dot(&arc.anchor), mu.dot(&arc.tangent));
    mh_angle(arc.lower, arc.upper, mp, mv, alpha, current, steps, rng)
}

/// Metropolis–Hastings on `[lo, hi]` for `θ ↦ exp(α (mp cos θ + mv sin θ))`.
#[allow(clippy::too_many_arguments)]
fn mh_angle(lo: f64, hi: f64, mp: f64, mv: f64, alpha: f64, current: f64, steps: usize, rng: &mut Rng) -> f64 {
    if hi <= lo {
        return lo;
    }
    if alpha == 0.0 {
        return rng.random_range(lo..=hi);
    }
    let log_density = |t: f64| {
        let (s, c) = t.sin_cos();
        alpha * (mp * c + mv * s)
    };
    let half = (hi - lo) / 6.0;
    let window = |t: f64| ((t - half).max(lo), (t + half).min(hi));

    let mut theta = current.clamp(lo, hi);
    let mut log_f = log_density(theta);
    for _ in 0..steps {
        let (a, b) = window(theta);
        let proposal = rng.random_range(a..=b);
        let (pa, pb) = window(proposal);
        let log_f_new = log_density(proposal);
        let log_accept = log_f_new - log_f + ((b - a) / (pb - pa)).ln();
        if log_accept >= 0.0 || rng.random::<f64>().ln() < log_accept {
            theta = proposal;
            log_f = log_f_new;
        }
    }
    theta
}

/// Specular reflection of the tangent `v` at boundary point `q` off the facet with normal `a`.
pub fn reflect_direction(q: &DVector<f64>, v: &DVector<f64>, a: &DVector<f64>) -> Result<DVector<f64>> {
    let a_t = tangent_projection(q, a).ok_or(Error::TangentFacet)?;
    Ok(v - &a_t * (2.0 * v.dot(&a_t)))
}

/// One-dimensional target along a great-circle arc.
#[derive(Debug, Clone, PartialEq)]
pub enum ArcTarget {
    Uniform,
    /// von Mises–Fisher restricted to the arc, sampled by Metropolis–Hastings.
    Vmf {
        mean: DVector<f64>,
        alpha: f64,
        steps: usize,
    },
}

impl ArcTarget {
    pub fn vmf(mean: DVector<f64>, alpha: f64) -> Self {
        if alpha == 0.0 {
            ArcTarget::Uniform
        } else {
            ArcTarget::Vmf { mean, alpha, steps: MH_WALK_LENGTH }
        }
    }

    pub fn sample(&self, arc: &ArcInterval, rng: &mut Rng) -> f64 {
        match self {
            ArcTarget::Uniform => uniform_arc_sample(arc, rng),
            ArcTarget::Vmf { mean, alpha, steps } => mh_arc_sample(arc, mean, *alpha, 0.0, *steps, rng),
        }
    }

    fn sample_bounds(&self, lo: f64, hi: f64, p: &DVector<f64>, v: &DVector<f64>, rng: &mut Rng) -> f64 {
        match self {
            ArcTarget::Uniform if hi <= lo => lo,
            ArcTarget::Uniform => rng.random_range(lo..=hi),
            ArcTarget::Vmf { mean, alpha, steps } => {
                mh_angle(lo, hi, mean.dot(p), mean.dot(v), *alpha, 0.0, *steps, rng)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkKind {
    Gcw,
    Regcw,
}

impl std::str::FromStr for WalkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcw" => Ok(WalkKind::Gcw),
            "regcw" => Ok(WalkKind::Regcw),
            other => Err(Error::InvalidArgument(format!("unknown walk '{other}'"))),
        }
    }
}

/// Step counters surfaced in diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkCounters {
    pub steps: u64,
    /// Steps left in place because the arc could not be computed.
    pub boundary_failures: u64,
    /// Reflective steps that exhausted the reflection budget.
    pub budget_violations: u64,
    pub reflections: u64,
}

impl WalkCounters {
    pub fn merge(&mut self, other: &WalkCounters) {
        self.steps += other.steps;
        self.boundary_failures += other.boundary_failures;
        self.budget_violations += other.budget_violations;
        self.reflections += other.reflections;
    }

    pub fn violation_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.budget_violations as f64 / self.steps as f64
        }
    }
}

/// Reflective walk parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReGcwParams {
    /// Trajectory-length scale in radians.
    pub tau: f64,
    /// Maximum reflections per step.
    pub rho: usize,
    pub walk_length: usize,
}

impl ReGcwParams {
    pub fn new(tau: f64, rho: usize, walk_length: usize) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() || rho < 1 || walk_length < 1 {
            return Err(Error::InvalidArgument(format!(
                "invalid walk parameters tau={tau} rho={rho} walk_length={walk_length}"
            )));
        }
        Ok(Self { tau, rho, walk_length })
    }

    /// `ρ = 100 d`, walk length 1.
    pub fn with_defaults(tau: f64, dim: usize) -> Result<Self> {
        Self::new(tau, 100 * dim, 1)
    }
}

/// Mutable chain state. Confined to one thread.
#[derive(Debug, Clone)]
pub struct WalkState {
    pub point: DVector<f64>,
    pub component: usize,
    pub rng: Rng,
    pub counters: WalkCounters,
    ap: DVector<f64>,
    av: DVector<f64>,
}

impl WalkState {
    pub fn new(point: DVector<f64>, component: usize, rng: Rng) -> Self {
        Self { point, component, rng, counters: WalkCounters::default(), ap: DVector::zeros(0), av: DVector::zeros(0) }
    }

    /// `A p` and `A v` in one pass over the column-major `A`.
    fn products(&mut self, a: &DMatrix<f64>, v: &DVector<f64>) {
        let m = a.nrows();
        if self.ap.len() != m {
            self.ap = DVector::zeros(m);
            self.av = DVector::zeros(m);
        }
        let ap = self.ap.as_mut_slice();
        let av = self.av.as_mut_slice();
        ap.fill(0.0);
        av.fill(0.0);
        for (k, col) in a.as_slice().chunks_exact(m).enumerate() {
            let (pk, vk) = (self.point[k], v[k]);
            for j in 0..m {
                ap[j] += col[j] * pk;
                av[j] += col[j] * vk;
            }
        }
    }
}

fn renormalize(p: &mut DVector<f64>) {
    let n = p.norm();
    *p /= n;
}

/// One great cycle walk step towards `target`.
pub fn gcw_step(state: &mut WalkState, simplex: &SimplexH, target: &ArcTarget) -> Result<()> {
    state.counters.steps += 1;
    let v = random_tangent(&state.point, &mut state.rng);
    state.products(simplex.normals(), &v);
    let b = simplex.offsets();
    let norms = simplex.normal_norms();
    if (0..b.len()).any(|j| b[j] - state.ap[j] < -INVARIANT_TOL * norms[j]) {
        state.counters.boundary_failures += 1;
        return Err(Error::AnchorOutsideSimplex);
    }
    let (lo, hi, _) = arc_bounds(&state.ap, &state.av, b);
    let theta = target.sample_bounds(lo, hi, &state.point, &v, &mut state.rng);
    let (sn, cs) = theta.sin_cos();
    let mut next = &state.point * cs + &v * sn;
    let scale = 1.0 / next.norm();
    next *= scale;
    // A next = (A p cos θ + A v sin θ) / |p cos θ + v sin θ|.
    let inside =
        (0..b.len()).all(|j| b[j] - (state.ap[j] * cs + state.av[j] * sn) * scale >= -INVARIANT_TOL * norms[j]);
    if inside {
        state.point = next;
    } else {
        state.counters.boundary_failures += 1;
    }
    Ok(())
}

/// First forward facet hit of the circle, skipping the anchor-contact root of `skip`.
fn first_exit(ap: &DVector<f64>, av: &DVector<f64>, b: &DVector<f64>, skip: Option<usize>) -> Option<(f64, usize)> {
    let scan = |validate: bool| {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..b.len() {
            if Some(j) != skip && best.is_some_and(|(t, _)| (b[j] - ap[j]) >= t * ap[j].hypot(av[j])) {
                continue;
            }
            let roots = if validate { facet_roots(ap[j], av[j], b[j]) } else { raw_roots(ap[j], av[j], b[j]) };
            let Some((mut exit, _)) = roots else { continue };
            if Some(j) == skip && exit < ANCHOR_EPS {
                // The facet just reflected from: we are moving inward, so its next
                // exit is the far root.
                let r = ap[j].hypot(av[j]);
                exit = (av[j].atan2(ap[j]) - (b[j] / r).acos()).rem_euclid(TAU);
                if exit < ANCHOR_EPS {
                    continue;
                }
            }
            if best.is_none_or(|(t, _)| exit < t) {
                best = Some((exit, j));
            }
        }
        best
    };
    match scan(false) {
        Some((_, j)) if facet_roots(ap[j], av[j], b[j]).is_none() => scan(true),
        best => best,
    }
}

/// One reflective great cycle walk step. Exhausting the reflection budget
/// leaves the chain at the step's initial point.
pub fn regcw_step(state: &mut WalkState, simplex: &SimplexH, params: &ReGcwParams) {
    state.counters.steps += 1;
    let eta: f64 = 1.0 - state.rng.random::<f64>();
    let mut remaining = -params.tau * eta.ln();
    let start = state.point.clone();
    let mut p = state.point.clone();
    let mut v = random_tangent(&p, &mut state.rng);
    let b = simplex.offsets();
    let mut last = None;
    let mut reflections = 0usize;

    loop {
        state.point.copy_from(&p);
        state.products(simplex.normals(), &v);
        let hit = first_exit(&state.ap, &state.av, b, last);
        match hit {
            Some((theta, j)) if theta <= remaining => {
                if reflections == params.rho {
                    state.counters.budget_violations += 1;
                    state.point = start;
                    return;
                }
                let (s, c) = theta.sin_cos();
                let mut q = &p * c + &v * s;
                let mut dir = &v * c - &p * s;
                renormalize(&mut q);
                dir -= &q * q.dot(&dir);
                renormalize(&mut dir);
                match reflect_direction(&q, &dir, &simplex.normal(j)) {
                    Ok(mut reflected) => {
                        reflected -= &q * q.dot(&reflected);
                        renormalize(&mut reflected);
                        v = reflected;
                    }
                    Err(_) => {
                        state.counters.boundary_failures += 1;
                        state.point = start;
                        return;
                    }
                }
                p = q;
                remaining -= theta;
                reflections += 1;
                state.counters.reflections += 1;
                last = Some(j);
            }
            _ => {
                let (s, c) = remaining.sin_cos();
                let mut next = &p * c + &v * s;
                let scale = 1.0 / next.norm();
                next *= scale;
                let norms = simplex.normal_norms();
                let inside = (0..b.len())
                    .all(|j| b[j] - (state.ap[j] * c + state.av[j] * s) * scale >= -INVARIANT_TOL * norms[j]);
                if inside {
                    state.point = next;
                } else {
                    state.counters.boundary_failures += 1;
                    state.point = start;
                }
                return;
            }
        }
    }
}

/// Trajectory scale: the longest arc seen over `20 d` uniform great cycle steps.
pub fn estimate_tau(start: &DVector<f64>, simplex: &SimplexH, rng: &mut Rng) -> Result<f64> {
    let d = simplex.dim();
    let mut state = WalkState::new(start.clone(), 0, rng::child(rng, 0x7A0));
    let mut tau = 0.0_f64;
    for _ in 0..(20 * d) {
        let v = random_tangent(&state.point, &mut state.rng);
        let arc = arc_in_simplex(&state.point, &v, simplex)?;
        tau = tau.max(arc.length());
        let theta = uniform_arc_sample(&arc, &mut state.rng);
        let mut next = arc.point(theta);
        renormalize(&mut next);
        if simplex.contains(&next, INVARIANT_TOL) {
            state.point = next;
        }
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("degenerate trajectory scale {tau}")));
    }
    Ok(tau)
}

/// Sampler configuration shared by the component and patch drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub kind: WalkKind,
    /// Override for `τ`; estimated per component when absent.
    pub tau: Option<f64>,
    /// Override for `ρ`; `100 d` when absent.
    pub rho: Option<usize>,
    pub walk_length: usize,
    /// Steps discarded before the first emitted point.
    pub burn_in: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self { kind: WalkKind::Regcw, tau: None, rho: None, walk_length: 1, burn_in: 100 }
    }
}

/// A chain confined to one component.
#[derive(Debug, Clone)]
pub struct ComponentSampler<'a> {
    body: &'a PatchBody,
    kind: WalkKind,
    params: ReGcwParams,
    target: ArcTarget,
    pub state: WalkState,
}

impl<'a> ComponentSampler<'a> {
    pub fn new(body: &'a PatchBody, component: usize, config: &WalkConfig, mut rng: Rng) -> Result<Self> {
        let comp = body.components.get(component).ok_or(Error::EmptyIntersection)?;
        let d = body.dim();
        let tau = match config.tau {
            Some(t) => t,
            None if config.kind == WalkKind::Regcw => estimate_tau(&comp.start, &body.simplex, &mut rng)?,
            None => 1.0,
        };
        let params = ReGcwParams::new(tau, config.rho.unwrap_or(100 * d), config.walk_length.max(1))?;
        let mut sampler = Self {
            body,
            kind: config.kind,
            params,
            target: ArcTarget::Uniform,
            state: WalkState::new(comp.start.clone(), component, rng),
        };
        for _ in 0..config.burn_in {
            sampler.step();
        }
        Ok(sampler)
    }

    /// A great cycle walk towards a non-uniform arc target.
    pub fn with_target(mut self, target: ArcTarget) -> Self {
        self.kind = WalkKind::Gcw;
        self.target = target;
        self
    }

    pub fn set_target(&mut self, target: ArcTarget) {
        self.target = target;
    }

    pub fn params(&self) -> &ReGcwParams {
        &self.params
    }

    pub fn step(&mut self) {
        match self.kind {
            WalkKind::Gcw => {
                // An out-of-simplex anchor is counted and leaves the point unchanged.
                let _ = gcw_step(&mut self.state, &self.body.simplex, &self.target);
            }
            WalkKind::Regcw => regcw_step(&mut self.state, &self.body.simplex, &self.params),
        }
    }

    /// Advance `walk_length` steps and return the current point.
    pub fn next_point(&mut self) -> DVector<f64> {
        for _ in 0..self.params.walk_length {
            self.step();
        }
        self.state.point.clone()
    }
}

/// `n` points from one component.
pub fn sample_component(
    body: &PatchBody,
    component: usize,
    n: usize,
    config: &WalkConfig,
    rng: Rng,
) -> Result<(Vec<DVector<f64>>, WalkCounters)> {
    let mut sampler = ComponentSampler::new(body, component, config, rng)?;
    let points = (0..n).map(|_| sampler.next_point()).collect();
    Ok((points, sampler.state.counters))
}

/// A point of `K` tagged with its component.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample {
    pub component: usize,
    pub point: DVector<f64>,
}

/// `n` points across components, each draw choosing a component by relative volume.
pub fn sample_patch(
    body: &PatchBody,
    n: usize,
    config: &WalkConfig,
    rng: &mut Rng,
) -> Result<(Vec<PatchSample>, WalkCounters)> {
    if body.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let weights = body.weights().ok_or(Error::VolumesNotCached)?;
    let total: f64 = weights.iter().sum();
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cumulative.push(acc);
    }
    let mut samplers: Vec<Option<ComponentSampler>> = (0..weights.len()).map(|_| None).collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let m = cumulative.iter().position(|&c| u < c).unwrap_or(weights.len() - 1);
        if samplers[m].is_none() {
            let stream = rng::stream(rng.random(), &[m as u64]);
            samplers[m] = Some(ComponentSampler::new(body, m, config, stream)?);
        }
        let point = samplers[m].as_mut().expect("initialised").next_point();
        out.push(PatchSample { component: m, point });
    }
    let mut counters = WalkCounters::default();
    for s in samplers.iter().flatten() {
        counters.merge(&s.state.counters);
    }
    Ok((out, counters))
}
