//! Long-only portfolios drawn uniformly from an iso-variance level set.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::build_transform;
use crate::rng::Rng;
use crate::topology::PatchBody;
use crate::volume::{relative_volumes, AnnealingConfig};
use crate::walks::{sample_patch, WalkConfig, WalkCounters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSamplerConfig {
    pub walk: WalkConfig,
    pub annealing: AnnealingConfig,
}

impl Default for LevelSamplerConfig {
    fn default() -> Self {
        Self {
            walk: WalkConfig { walk_length: 10, ..WalkConfig::default() },
            // Weights between components of one level usually differ by orders of magnitude.
            annealing: AnnealingConfig { epsilon: 0.5, ..AnnealingConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSample {
    pub portfolios: Vec<DVector<f64>>,
    pub n_components: usize,
    pub weights: Vec<f64>,
    pub counters: WalkCounters,
}

/// `n` portfolios with `x' Σ x = level`, `x >= 0`, `sum x = 1`.
pub fn sample_level(
    cov: &DMatrix<f64>,
    level: f64,
    n: usize,
    config: &LevelSamplerConfig,
    rng: &mut Rng,
) -> Result<LevelSample> {
    let assets = cov.nrows();
    match assets {
        0 => Err(Error::TooFewAssets { need: 1, got: 0 }),
        1 => Ok(LevelSample {
            portfolios: vec![DVector::from_element(1, 1.0); n],
            n_components: 1,
            weights: vec![1.0],
            counters: WalkCounters::default(),
        }),
        2 => sample_segment(cov, level, n, rng),
        _ => {
            let transform = build_transform(cov, level, assets)?;
            let mut body = PatchBody::new(transform.simplex())?;
            if body.is_empty() {
                return Err(Error::EmptyIntersection);
            }
            let (weights, _) = relative_volumes(&mut body, &config.annealing, rng.random())?;
            let (points, counters) = sample_patch(&body, n, &config.walk, rng)?;
            let portfolios = points.iter().map(|p| transform.from_patch(&p.point)).collect();
            Ok(LevelSample { portfolios, n_components: body.n_components(), weights, counters })
        }
    }
}

/// Two assets: the level set is at most two points of the segment.
fn sample_segment(cov: &DMatrix<f64>, level: f64, n: usize, rng: &mut Rng) -> Result<LevelSample> {
    // Variance of t e_1 + (1 - t) e_2 is a t^2 + b t + c.
    let (s11, s12, s22) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    let a = s11 + s22 - 2.0 * s12;
    let b = 2.0 * (s12 - s22);
    let c = s22 - level;
    let mut roots = Vec::new();
    if a.abs() < 1e-15 {
        if b.abs() > 1e-15 {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            roots.push((-b - s) / (2.0 * a));
            if s > 0.0 {
                roots.push((-b + s) / (2.0 * a));
            }
        }
    }
    roots.retain(|t| (-1e-12..=1.0 + 1e-12).contains(t));
    if roots.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let points: Vec<DVector<f64>> = roots
        .iter()
        .map(|&t| {
            let t = t.clamp(0.0, 1.0);
            DVector::from_vec(vec![t, 1.0 - t])
        })
        .collect();
    let portfolios = (0..n).map(|_| points[rng.random_range(0..points.len())].clone()).collect();
    let k = points.len();
    Ok(LevelSample { portfolios, n_components: k, weights: vec![1.0 / k as f64; k], counters: WalkCounters::default() })
}
