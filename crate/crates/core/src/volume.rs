//! Multiphase Monte Carlo volume estimation of patch components.
//!
//! The volume of a component `K_i` is written as a telescoping product over an
//! increasing sequence of vMF concentrations `0 = α_0 < α_1 < … < α_k`:
//!
//! ```text
//! vol(K_i) = ∫_{K_i} f_k / Π_j (∫_{K_i} f_j / ∫_{K_i} f_{j-1}),   f_j = exp(α_j μ^T x)
//! ```
//!
//! The schedule starts at the uniform function and raises `α` until almost all
//! of the vMF mass lies inside `K_i`, so `∫_{K_i} f_k` is a known sphere
//! integral times an inside fraction measured with exact vMF draws.

use std::collections::VecDeque;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::topology::PatchBody;
use crate::vmf::{log_sphere_area, log_sphere_integral, sample_vmf};
use crate::walks::{ArcTarget, ComponentSampler, WalkConfig, WalkCounters, WalkKind};

/// Tunables of the annealing scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealingConfig {
    /// Target relative error of the volume.
    pub epsilon: f64,
    /// Allowed vMF mass outside the component at the last phase.
    pub epsilon0: f64,
    /// Failure probability of the stopping test.
    pub zeta: f64,
    /// Width of the acceptable variance-ratio window `[1 - δ, 1]`.
    pub delta: f64,
    /// Sliding-window length; `4 d^2 + 500` when absent.
    pub window: Option<usize>,
    /// Samples per schedule level; `1200 + d^2` when absent.
    pub schedule_samples: Option<usize>,
    pub max_samples_per_phase: usize,
    pub max_phases: usize,
}

impl Default for AnnealingConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            epsilon0: 0.05,
            zeta: 0.05,
            delta: 0.1,
            window: None,
            schedule_samples: None,
            max_samples_per_phase: 10_000_000,
            max_phases: 200,
        }
    }
}

impl AnnealingConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self { epsilon, ..Self::default() }
    }

    pub fn window_len(&self, d: usize) -> usize {
        self.window.unwrap_or(4 * d * d + 500)
    }

    pub fn schedule_len(&self, d: usize) -> usize {
        self.schedule_samples.unwrap_or(1200 + d * d)
    }

    /// Exact vMF draws per stopping test, `ceil(ln(1/(1-ζ)) / ε0^2)`.
    pub fn stop_samples(&self) -> usize {
        ((1.0 / (1.0 - self.zeta)).ln() / (self.epsilon0 * self.epsilon0)).ceil().max(1.0) as usize
    }

    /// Exact vMF draws used to measure the final inside fraction.
    pub fn final_samples(&self) -> usize {
        self.stop_samples().max((64.0 / (self.epsilon * self.epsilon)).ceil() as usize)
    }

    fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.epsilon) || !unit(self.epsilon0) || !unit(self.zeta) || !unit(self.delta) {
            return Err(Error::InvalidArgument("epsilon, epsilon0, zeta and delta must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub component: usize,
    /// Surface measure of the component.
    pub volume: f64,
    pub relative_error: f64,
    pub phases: usize,
    pub schedule: Vec<f64>,
    /// `ln R_j` per phase.
    pub log_ratios: Vec<f64>,
    /// Fraction of the last vMF inside the component.
    pub inside_fraction: f64,
    pub mean: Vec<f64>,
    pub samples: u64,
    pub counters: WalkCounters,
}

/// Empirical mean and `Var / Mean^2` of `exp(Δα t)` over cosines `t`.
///
/// The ratio is invariant to the common scale factor, which is chosen to keep
/// the exponentials bounded.
pub fn moment_ratio(cosines: &[f64], delta_alpha: f64) -> (f64, f64) {
    let n = cosines.len() as f64;
    let top = cosines.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut s1, mut s2) = (0.0, 0.0);
    for &t in cosines {
        let r = (delta_alpha * (t - top)).exp();
        s1 += r;
        s2 += r * r;
    }
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    ((delta_alpha * top).exp() * mean, var / (mean * mean))
}

/// Normalised sample mean of component samples, falling back to `fallback`
/// when the mean is degenerate and to the nearest sample when the mean
/// direction leaves the component.
pub fn choose_mu(
    body: &PatchBody,
    component: usize,
    samples: &[DVector<f64>],
    fallback: &DVector<f64>,
) -> DVector<f64> {
    match mean_direction(samples) {
        Ok(mu) => match body.membership(&mu) {
            Ok(Some(c)) if c == component => mu,
            _ => samples
                .iter()
                .max_by(|a, b| a.dot(&mu).total_cmp(&b.dot(&mu)))
                .cloned()
                .unwrap_or_else(|| fallback.clone()),
        },
        Err(_) => fallback.clone(),
    }
}

pub fn mean_direction(samples: &[DVector<f64>]) -> Result<DVector<f64>> {
    let first = samples.first().ok_or(Error::DegenerateMean)?;
    let sum = samples.iter().fold(DVector::zeros(first.len()), |acc, x| acc + x);
    let mean = sum / samples.len() as f64;
    let n = mean.norm();
    if n < 1e-8 {
        return Err(Error::DegenerateMean);
    }
    Ok(mean / n)
}

const MAX_DOUBLINGS: u32 = 80;

/// Binary search on a monotone variance ratio for a point inside `[1 - δ, 1]`.
fn search_window(mut ratio_at: impl FnMut(f64) -> f64, delta: f64, stall_at: f64) -> Result<f64> {
    let mut hi = 1.0;
    let mut doublings = 0;
    while ratio_at(hi) <= 1.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::ScheduleStall(stall_at));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        let v = ratio_at(mid);
        if v > 1.0 {
            hi = mid;
        } else if v < 1.0 - delta {
            lo = mid;
        } else {
            return Ok(mid);
        }
    }
    if lo > 0.0 {
        Ok(lo)
    } else {
        Err(Error::ScheduleStall(stall_at))
    }
}

/// First concentration: the variance ratio of `f_1 / f_0` over uniform samples lies in `[1 - δ, 1]`.
pub fn first_alpha(cosines: &[f64], delta: f64) -> Result<f64> {
    search_window(|a| moment_ratio(cosines, a).1, delta, 0.0)
}

/// Next concentration `α (1 + 1/d)^r` with the largest admissible `r`, given cosines
/// of samples drawn from `f_prev`.
pub fn next_alpha(alpha_prev: f64, cosines: &[f64], d: usize, delta: f64) -> Result<f64> {
    let growth = 1.0 + 1.0 / d as f64;
    let r = search_window(|r| moment_ratio(cosines, alpha_prev * (growth.powf(r) - 1.0)).1, delta, alpha_prev)?;
    Ok(alpha_prev * growth.powf(r))
}

/// Number of `n` exact vMF(μ, α) draws landing outside the component.
pub fn count_outside(
    body: &PatchBody,
    component: usize,
    mu: &DVector<f64>,
    alpha: f64,
    n: usize,
    rng: &mut Rng,
) -> usize {
    (0..n)
        .filter(|_| {
            let x = sample_vmf(mu, alpha, rng);
            !matches!(body.membership(&x), Ok(Some(c)) if c == component)
        })
        .count()
}

/// Whether fewer than `ε0 ν` of `ν` exact vMF draws fall outside the component.
pub fn stop_check(
    body: &PatchBody,
    component: usize,
    mu: &DVector<f64>,
    alpha: f64,
    config: &AnnealingConfig,
    rng: &mut Rng,
) -> bool {
    let nu = config.stop_samples();
    let outside = count_outside(body, component, mu, alpha, nu, rng);
    (outside as f64) < config.epsilon0 * nu as f64
}

/// Sliding window with O(1) amortised max/min.
struct SlidingRange {
    cap: usize,
    values: VecDeque<(u64, f64)>,
    maxq: VecDeque<(u64, f64)>,
    minq: VecDeque<(u64, f64)>,
    index: u64,
}

impl SlidingRange {
    fn new(cap: usize) -> Self {
        Self { cap, values: VecDeque::new(), maxq: VecDeque::new(), minq: VecDeque::new(), index: 0 }
    }

    fn push(&mut self, v: f64) {
        let i = self.index;
        self.index += 1;
        self.values.push_back((i, v));
        while self.maxq.back().is_some_and(|&(_, m)| m <= v) {
            self.maxq.pop_back();
        }
        self.maxq.push_back((i, v));
        while self.minq.back().is_some_and(|&(_, m)| m >= v) {
            self.minq.pop_back();
        }
        self.minq.push_back((i, v));
        if self.values.len() > self.cap {
            let (old, _) = self.values.pop_front().unwrap();
            if self.maxq.front().is_some_and(|&(j, _)| j == old) {
                self.maxq.pop_front();
            }
            if self.minq.front().is_some_and(|&(j, _)| j == old) {
                self.minq.pop_front();
            }
        }
    }

    fn full(&self) -> bool {
        self.values.len() == self.cap
    }

    fn spread(&self) -> f64 {
        let max = self.maxq.front().map_or(f64::NAN, |x| x.1);
        let min = self.minq.front().map_or(f64::NAN, |x| x.1);
        (max - min) / min
    }
}

/// Streaming estimate of `ln(∫ f_next / ∫ f_prev)` from a chain targeting `f_prev`.
///
/// `warm` holds cosines already drawn from `f_prev`; they enter the running
/// mean first. Returns the log ratio and the number of new chain samples.
pub fn ratio_estimate(
    sampler: &mut ComponentSampler,
    mu: &DVector<f64>,
    delta_alpha: f64,
    warm: &[f64],
    tolerance: f64,
    window: usize,
    max_samples: usize,
) -> Result<(f64, u64)> {
    // exp(Δα (t - 1)) stays in (0, 1]; the scale is restored at the end.
    let mut sum = 0.0;
    let mut n = 0u64;
    let mut range = SlidingRange::new(window);
    let push = |t: f64, sum: &mut f64, n: &mut u64, range: &mut SlidingRange| {
        *sum += (delta_alpha * (t - 1.0)).exp();
        *n += 1;
        range.push(*sum / *n as f64);
    };
    for &t in warm {
        push(t, &mut sum, &mut n, &mut range);
    }
    let mut fresh = 0u64;
    while !(range.full() && range.spread() <= tolerance / 2.0) {
        if fresh as usize >= max_samples {
            return Err(Error::NonConvergence(max_samples));
        }
        let x = sampler.next_point();
        push(mu.dot(&x), &mut sum, &mut n, &mut range);
        fresh += 1;
    }
    Ok((delta_alpha + (sum / n as f64).ln(), fresh))
}

/// Volume of one component to relative error `config.epsilon`.
pub fn estimate_volume(
    body: &PatchBody,
    component: usize,
    config: &AnnealingConfig,
    rng: &mut Rng,
) -> Result<VolumeEstimate> {
    config.validate()?;
    let comp = body.components.get(component).ok_or(Error::EmptyIntersection)?;
    let d = body.dim();
    let n_sched = config.schedule_len(d);
    let window = config.window_len(d);
    let mut samples_used = 0u64;
    let mut counters = WalkCounters::default();

    // Uniform samples with the reflective walk.
    let uniform_cfg = WalkConfig { kind: WalkKind::Regcw, burn_in: 10 * d + 100, ..WalkConfig::default() };
    let mut uniform = ComponentSampler::new(body, component, &uniform_cfg, rng::child(rng, 1))?;
    let level0: Vec<DVector<f64>> = (0..n_sched).map(|_| uniform.next_point()).collect();
    samples_used += n_sched as u64;
    counters.merge(&uniform.state.counters);

    let mu = choose_mu(body, component, &level0, &comp.start);
    let cos = |pts: &[DVector<f64>]| pts.iter().map(|x| mu.dot(x)).collect::<Vec<_>>();

    let mut schedule = vec![0.0];
    let mut levels: Vec<Vec<DVector<f64>>> = vec![level0];
    let mut stop_rng = rng::child(rng, 2);
    if !stop_check(body, component, &mu, 0.0, config, &mut stop_rng) {
        let gcw_cfg = WalkConfig { kind: WalkKind::Gcw, burn_in: 0, ..WalkConfig::default() };
        let mut alpha = first_alpha(&cos(&levels[0]), config.delta)?;
        let mut chain_rng = rng::child(rng, 3);
        loop {
            schedule.push(alpha);
            if stop_check(body, component, &mu, alpha, config, &mut stop_rng) {
                break;
            }
            if schedule.len() > config.max_phases {
                return Err(Error::ScheduleStall(alpha));
            }
            let from = levels.last().unwrap().last().unwrap().clone();
            let mut sampler = chain_at(
                body,
                component,
                &gcw_cfg,
                &from,
                &mu,
                alpha,
                rng::child(&mut chain_rng, schedule.len() as u64),
            )?;
            let pts: Vec<DVector<f64>> = (0..n_sched).map(|_| sampler.next_point()).collect();
            samples_used += n_sched as u64;
            counters.merge(&sampler.state.counters);
            alpha = next_alpha(alpha, &cos(&pts), d, config.delta)?;
            levels.push(pts);
        }
    }

    let k = schedule.len() - 1;
    let mut log_ratios = Vec::with_capacity(k);
    if k > 0 {
        let eps_k = config.epsilon / (2.0 * (k as f64).sqrt());
        let gcw_cfg = WalkConfig { kind: WalkKind::Gcw, burn_in: 0, ..WalkConfig::default() };
        let mut ratio_rng = rng::child(rng, 4);
        for j in 1..=k {
            let prev = schedule[j - 1];
            let warm = &levels[j - 1];
            let from = warm.last().unwrap().clone();
            let mut sampler = if prev == 0.0 {
                let mut s = uniform.clone();
                s.state.rng = rng::child(&mut ratio_rng, j as u64);
                s
            } else {
                chain_at(body, component, &gcw_cfg, &from, &mu, prev, rng::child(&mut ratio_rng, j as u64))?
            };
            let before = sampler.state.counters;
            let (log_r, fresh) = ratio_estimate(
                &mut sampler,
                &mu,
                schedule[j] - prev,
                &cos(warm),
                eps_k,
                window,
                config.max_samples_per_phase,
            )?;
            samples_used += fresh;
            let mut delta_counters = sampler.state.counters;
            delta_counters.steps -= before.steps;
            delta_counters.boundary_failures -= before.boundary_failures;
            delta_counters.budget_violations -= before.budget_violations;
            delta_counters.reflections -= before.reflections;
            counters.merge(&delta_counters);
            log_ratios.push(log_r);
        }
    }

    let alpha_k = schedule[k];
    let n_final = config.final_samples();
    let mut final_rng = rng::child(rng, 5);
    let outside = count_outside(body, component, &mu, alpha_k, n_final, &mut final_rng);
    let inside_fraction = (n_final - outside) as f64 / n_final as f64;
    if inside_fraction == 0.0 {
        return Err(Error::ScheduleStall(alpha_k));
    }
    let log_volume = log_sphere_integral(d, alpha_k) + inside_fraction.ln() - log_ratios.iter().sum::<f64>();
    let volume = log_volume.exp().min(log_sphere_area(d).exp());

    Ok(VolumeEstimate {
        component,
        volume,
        relative_error: config.epsilon,
        phases: k,
        schedule,
        log_ratios,
        inside_fraction,
        mean: mu.iter().copied().collect(),
        samples: samples_used,
        counters,
    })
}

fn chain_at<'a>(
    body: &'a PatchBody,
    component: usize,
    cfg: &WalkConfig,
    from: &DVector<f64>,
    mu: &DVector<f64>,
    alpha: f64,
    rng: Rng,
) -> Result<ComponentSampler<'a>> {
    let mut s = ComponentSampler::new(body, component, cfg, rng)?.with_target(ArcTarget::vmf(mu.clone(), alpha));
    s.state.point = from.clone();
    Ok(s)
}

/// Volumes of every component and the normalised weights, cached on the body.
pub fn relative_volumes(
    body: &mut PatchBody,
    config: &AnnealingConfig,
    seed: u64,
) -> Result<(Vec<f64>, Vec<VolumeEstimate>)> {
    let m = body.n_components();
    if m == 0 {
        return Err(Error::EmptyIntersection);
    }
    if m == 1 {
        body.set_weights(&[1.0])?;
        return Ok((vec![1.0], Vec::new()));
    }
    let shared: &PatchBody = body;
    let estimates: Vec<VolumeEstimate> = (0..m)
        .into_par_iter()
        .map(|i| estimate_volume(shared, i, config, &mut rng::stream(seed, &[0x701, i as u64])))
        .collect::<Result<_>>()?;
    let total: f64 = estimates.iter().map(|e| e.volume).sum();
    let weights: Vec<f64> = estimates.iter().map(|e| e.volume / total).collect();
    body.set_weights(&weights)?;
    Ok((weights, estimates))
}
