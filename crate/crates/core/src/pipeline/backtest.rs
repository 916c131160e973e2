//! Quarterly formation of iso-variance portfolios and concatenated backtest paths.

use chrono::NaiveDate;
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cluster::{cluster_summary, ClusterSummary};
use super::covariance::{estimate_covariance, volatilities};
use super::panel::{AdmissionRules, ReturnsPanel};
use super::sampling::{sample_level, LevelSample, LevelSamplerConfig};
use super::sharpe::{sharpe_test, SharpeTest};
use super::stats::{monthly_returns, performance_stats, PerformanceStats, SharpeConvention};
use super::targets::{quintile_targets, VolatilityLevels, N_LEVELS};
use crate::error::{Error, Result};
use crate::rng;
use crate::walks::WalkCounters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConcatMode {
    #[default]
    Random,
    Momentum,
}

impl std::str::FromStr for ConcatMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Self::Random),
            "momentum" => Ok(Self::Momentum),
            other => Err(Error::InvalidArgument(format!("unknown concatenation mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub samples_per_level: usize,
    pub mode: ConcatMode,
    pub rules: AdmissionRules,
    pub sampler: LevelSamplerConfig,
    pub sharpe: SharpeConvention,
    /// Constant monthly risk-free rate.
    pub risk_free: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            samples_per_level: 1000,
            mode: ConcatMode::Random,
            rules: AdmissionRules::default(),
            sampler: LevelSamplerConfig::default(),
            sharpe: SharpeConvention::Arithmetic,
            risk_free: 0.0,
        }
    }
}

/// Portfolios formed at one rebalance date.
#[derive(Debug, Clone, PartialEq)]
pub struct Formation {
    pub date: NaiveDate,
    /// Row of the weekly series at which the holding period starts.
    pub row: usize,
    /// Admitted asset indices.
    pub assets: Vec<usize>,
    pub levels: VolatilityLevels,
    pub shrinkage: f64,
    /// `portfolios[level][sample]`, weights over `assets`.
    pub portfolios: Vec<Vec<DVector<f64>>>,
    pub n_components: Vec<usize>,
    pub counters: WalkCounters,
}

/// Holding-period rows of the holding series per quarter, `[start, end)`.
fn holding_ranges(panel: &ReturnsPanel, starts: &[usize]) -> Vec<(usize, usize)> {
    let hold = panel.holding();
    let w = &panel.weekly.dates;
    starts
        .windows(2)
        .map(|p| {
            let (from, to) = (w[p[0] - 1], w[p[1] - 1]);
            (hold.dates.partition_point(|d| *d <= from), hold.dates.partition_point(|d| *d <= to))
        })
        .collect()
}

/// Quarter-opening rows with a full estimation window. The last one only closes
/// the quarter before it.
pub fn rebalance_rows(panel: &ReturnsPanel, rules: &AdmissionRules) -> Vec<usize> {
    panel.quarter_starts(rules.window)
}

/// Buy-and-hold period returns of `weights` over `assets` on rows `[from, to)`.
fn buy_and_hold(rows: &[Vec<f64>], assets: &[usize], weights: &DVector<f64>) -> Vec<f64> {
    let mut value: Vec<f64> = weights.iter().copied().collect();
    let mut total: f64 = value.iter().sum();
    rows.iter()
        .map(|r| {
            for (k, &i) in assets.iter().enumerate() {
                let ret = if r[i].is_nan() { 0.0 } else { r[i] };
                value[k] *= 1.0 + ret;
            }
            let next: f64 = value.iter().sum();
            let out = next / total - 1.0;
            total = next;
            out
        })
        .collect()
}

fn compound(returns: &[f64]) -> f64 {
    returns.iter().map(|r| (1.0 + r).ln()).sum::<f64>().exp_m1()
}

/// Sampled portfolios at every rebalance date that has a full following quarter.
pub fn form_portfolios(panel: &ReturnsPanel, config: &BacktestConfig, seed: u64) -> Result<Vec<Formation>> {
    let starts = rebalance_rows(panel, &config.rules);
    if starts.len() < 2 {
        return Err(Error::TooShortSeries { need: 2, got: starts.len() });
    }
    starts[..starts.len() - 1].par_iter().enumerate().map(|(k, &row)| form_at(panel, config, seed, k, row)).collect()
}

fn form_at(panel: &ReturnsPanel, config: &BacktestConfig, seed: u64, k: usize, row: usize) -> Result<Formation> {
    let assets = panel.admitted(row, &config.rules);
    if assets.is_empty() {
        return Err(Error::TooFewAssets { need: 1, got: 0 });
    }
    let window = panel.window(row, config.rules.window, &assets);
    let n = assets.len();
    let (cov, shrinkage, levels) = if n >= N_LEVELS {
        let est = estimate_covariance(&window)?;
        let levels = quintile_targets(&est.covariance, &volatilities(&window))?;
        (est.covariance, est.intensity, levels)
    } else if n == 1 {
        let v = volatilities(&window)[0];
        let cov = nalgebra::DMatrix::from_element(1, 1, v * v);
        let levels = VolatilityLevels {
            targets: vec![v * v; N_LEVELS],
            permutation: (0..N_LEVELS).collect(),
            groups: vec![vec![0]; N_LEVELS],
        };
        (cov, 0.0, levels)
    } else {
        return Err(Error::TooFewAssets { need: N_LEVELS, got: n });
    };
    let tasks: Vec<_> = (0..N_LEVELS)
        .into_par_iter()
        .map(|m| {
            let mut r = rng::stream(seed, &[0x5A4D, k as u64, m as u64]);
            match sample_level(&cov, levels.targets[m], config.samples_per_level, &config.sampler, &mut r) {
                // The target is the variance of its own quintile portfolio, so an empty
                // patch means the level set has no interior around that portfolio
                // (for instance a single-asset top group).
                Err(Error::EmptyIntersection) => {
                    let group = &levels.groups[levels.permutation[m]];
                    let mut x = DVector::zeros(n);
                    group.iter().for_each(|&i| x[i] = 1.0 / group.len() as f64);
                    Ok(LevelSample {
                        portfolios: vec![x; config.samples_per_level],
                        n_components: 0,
                        weights: Vec::new(),
                        counters: WalkCounters::default(),
                    })
                }
                other => other,
            }
        })
        .collect::<Result<_>>()?;
    let mut counters = WalkCounters::default();
    let mut portfolios = Vec::with_capacity(N_LEVELS);
    let mut n_components = Vec::with_capacity(N_LEVELS);
    for t in tasks {
        counters.merge(&t.counters);
        n_components.push(t.n_components);
        portfolios.push(t.portfolios);
    }
    Ok(Formation { date: panel.weekly.dates[row], row, assets, levels, shrinkage, portfolios, n_components, counters })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPaths {
    pub level: usize,
    /// `pairing[k][p]`: sample used by path `p` in quarter `k`.
    pub pairing: Vec<Vec<usize>>,
    /// Monthly returns per path.
    pub monthly: Vec<Vec<f64>>,
    pub stats: Vec<PerformanceStats>,
}

impl LevelPaths {
    /// Mean Sharpe ratio over paths with a finite value.
    pub fn mean_sharpe(&self) -> f64 {
        let finite: Vec<f64> = self.stats.iter().map(|s| s.sharpe).filter(|s| s.is_finite()).collect();
        finite.iter().sum::<f64>() / finite.len() as f64
    }

    pub fn risk_return_pairs(&self) -> Vec<[f64; 2]> {
        self.stats.iter().map(|s| [s.annual_std, s.annual_return]).collect()
    }

    /// Cross-path average monthly return.
    pub fn mean_series(&self) -> Vec<f64> {
        let n = self.monthly.len() as f64;
        let t = self.monthly.first().map_or(0, Vec::len);
        (0..t).map(|i| self.monthly.iter().map(|m| m[i]).sum::<f64>() / n).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub mode: ConcatMode,
    pub formations: Vec<Formation>,
    /// `segments[k][m][s]`: holding-period returns of sample `s` at level `m` in quarter `k`.
    pub segments: Vec<Vec<Vec<Vec<f64>>>>,
    pub months: Vec<(i32, u32)>,
    pub levels: Vec<LevelPaths>,
}

impl BacktestResult {
    pub fn cluster_summaries(&self) -> Result<Vec<ClusterSummary>> {
        self.levels.iter().map(|l| cluster_summary(l.level, &l.risk_return_pairs())).collect()
    }

    /// Equal-Sharpe tests of the lowest level's mean series against each other level.
    pub fn sharpe_tests(&self) -> Result<Vec<SharpeTest>> {
        let base = self.levels[0].mean_series();
        self.levels[1..].iter().map(|l| sharpe_test(&base, &l.mean_series())).collect()
    }
}

/// Holding-period returns of every sampled portfolio.
fn holding_segments(
    panel: &ReturnsPanel,
    formations: &[Formation],
    ranges: &[(usize, usize)],
) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
    let hold = panel.holding();
    formations
        .iter()
        .zip(ranges)
        .map(|(f, &(from, to))| {
            let rows = &hold.returns[from..to];
            for &i in &f.assets {
                if rows.iter().any(|r| r[i].is_nan()) {
                    return Err(Error::CoverageGap { asset: panel.assets[i].clone(), start: f.date.to_string() });
                }
            }
            Ok(f.portfolios
                .iter()
                .map(|level| level.iter().map(|w| buy_and_hold(rows, &f.assets, w)).collect())
                .collect())
        })
        .collect()
}

/// Indices that sort `scores` in descending order, ties by index.
fn rank_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

pub fn backtest(panel: &ReturnsPanel, config: &BacktestConfig, seed: u64) -> Result<BacktestResult> {
    let formations = form_portfolios(panel, config, seed)?;
    run_backtest(panel, config, seed, formations)
}

/// Concatenate paths from precomputed formations.
pub fn run_backtest(
    panel: &ReturnsPanel,
    config: &BacktestConfig,
    seed: u64,
    formations: Vec<Formation>,
) -> Result<BacktestResult> {
    let rows: Vec<usize> = formations.iter().map(|f| f.row).collect();
    let mut starts = rows.clone();
    let all = rebalance_rows(panel, &config.rules);
    let next = all
        .iter()
        .copied()
        .find(|&r| r > *rows.last().expect("formations are non-empty"))
        .ok_or(Error::TooShortSeries { need: 2, got: 1 })?;
    starts.push(next);
    let ranges = holding_ranges(panel, &starts);
    let segments = holding_segments(panel, &formations, &ranges)?;
    let hold = panel.holding();
    let dates: Vec<NaiveDate> = hold.dates[ranges[0].0..ranges.last().unwrap().1].to_vec();
    let n = config.samples_per_level;

    let levels: Vec<LevelPaths> = (0..N_LEVELS)
        .map(|m| {
            let mut pairing: Vec<Vec<usize>> = Vec::with_capacity(formations.len());
            let mut paths: Vec<Vec<f64>> = vec![Vec::with_capacity(dates.len()); n];
            for (k, f) in formations.iter().enumerate() {
                let perm = match (config.mode, k) {
                    (ConcatMode::Momentum, k) if k > 0 => {
                        // Paths ranked by the quarter just ended, matched to new portfolios
                        // ranked by their in-sample return over the same quarter.
                        let prev = &segments[k - 1][m];
                        let realised: Vec<f64> = pairing[k - 1].iter().map(|&s| compound(&prev[s])).collect();
                        let (from, to) = ranges[k - 1];
                        let in_sample: Vec<f64> = f.portfolios[m]
                            .iter()
                            .map(|w| compound(&buy_and_hold(&hold.returns[from..to], &f.assets, w)))
                            .collect();
                        let path_rank = rank_desc(&realised);
                        let new_rank = rank_desc(&in_sample);
                        let mut perm = vec![0; n];
                        for (p, s) in path_rank.into_iter().zip(new_rank) {
                            perm[p] = s;
                        }
                        perm
                    }
                    _ => {
                        let mut perm: Vec<usize> = (0..n).collect();
                        perm.shuffle(&mut rng::stream(seed, &[0x9E12, k as u64, m as u64]));
                        perm
                    }
                };
                for (p, &s) in perm.iter().enumerate() {
                    paths[p].extend_from_slice(&segments[k][m][s]);
                }
                pairing.push(perm);
            }
            let monthly: Vec<Vec<f64>> = paths.iter().map(|p| monthly_returns(&dates, p).1).collect();
            let rf = vec![config.risk_free; monthly.first().map_or(0, Vec::len)];
            let stats = monthly.iter().map(|r| performance_stats(r, &rf, config.sharpe)).collect::<Result<_>>()?;
            Ok(LevelPaths { level: m, pairing, monthly, stats })
        })
        .collect::<Result<_>>()?;
    let (months, _) = monthly_returns(&dates, &vec![0.0; dates.len()]);
    Ok(BacktestResult { mode: config.mode, formations, segments, months, levels })
}
