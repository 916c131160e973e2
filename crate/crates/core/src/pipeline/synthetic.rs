//! Synthetic weekly panels with planted risk-return structure.

use chrono::{Duration, NaiveDate};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::panel::{AssetMeta, ReturnSeries, ReturnsPanel};
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_assets: usize,
    pub years: usize,
    /// Lowest and highest annual volatility.
    pub vol_range: (f64, f64),
    /// Annual market factor volatility.
    pub market_vol: f64,
    /// Average share of asset variance explained by the market factor.
    pub market_share: f64,
    /// Low-volatility assets earn more when set; otherwise drift grows with volatility.
    pub low_vol_anomaly: bool,
    /// Asset-specific downside jumps, which make realised risk and return move in
    /// opposite directions.
    pub jumps: Option<DownsideJumps>,
}

/// Mean-compensated idiosyncratic crashes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DownsideJumps {
    pub weekly_prob: f64,
    /// Share of each asset's variance coming from jumps.
    pub variance_share: f64,
}

impl Default for DownsideJumps {
    fn default() -> Self {
        Self { weekly_prob: 0.002, variance_share: 0.3 }
    }
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_assets: 30,
            years: 12,
            vol_range: (0.10, 0.50),
            market_vol: 0.15,
            market_share: 0.36,
            low_vol_anomaly: true,
            jumps: None,
        }
    }
}

/// Weekly panel from a one-factor model `r = μ/52 + β f + e` (plus optional jumps)
/// starting on the first Friday of 2000.
pub fn synthetic_panel(config: &SyntheticConfig, seed: u64) -> Result<ReturnsPanel> {
    let n = config.n_assets;
    let weeks = config.years * 52 + 1;
    let mut r = rng::stream(seed, &[0x5157]);
    let (lo, hi) = config.vol_range;
    let mut vols: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64).collect();
    // Asset order carries no information.
    for i in (1..n).rev() {
        vols.swap(i, r.random_range(0..=i));
    }
    let betas: Vec<f64> =
        vols.iter().map(|v| config.market_share.sqrt() * v / config.market_vol * r.random_range(0.8..1.2)).collect();
    let (p_jump, jump_share) = config.jumps.map_or((0.0, 0.0), |j| (j.weekly_prob, j.variance_share));
    let jump_size: Vec<f64> = vols
        .iter()
        .map(|v| if p_jump > 0.0 { v * (jump_share / (52.0 * p_jump * (1.0 - p_jump))).sqrt() } else { 0.0 })
        .collect();
    let idio: Vec<f64> = vols
        .iter()
        .zip(&betas)
        .map(|(v, b)| (v * v * (1.0 - jump_share) - (b * config.market_vol).powi(2)).max(0.0).sqrt())
        .collect();
    let drift: Vec<f64> =
        vols.iter().map(|v| if config.low_vol_anomaly { 0.12 - 0.2 * (v - lo) } else { 0.02 + 0.3 * v }).collect();

    let start = NaiveDate::from_ymd_opt(2000, 1, 7).expect("valid date");
    let dates: Vec<NaiveDate> = (0..weeks).map(|k| start + Duration::weeks(k as i64)).collect();
    let sqrt52 = 52f64.sqrt();
    let returns: Vec<Vec<f64>> = (0..weeks)
        .map(|_| {
            let f: f64 = StandardNormal.sample(&mut r);
            (0..n)
                .map(|i| {
                    let e: f64 = StandardNormal.sample(&mut r);
                    let jump = if p_jump > 0.0 && r.random::<f64>() < p_jump { 1.0 } else { 0.0 };
                    let x = drift[i] / 52.0 + betas[i] * config.market_vol * f / sqrt52 + idio[i] * e / sqrt52
                        - jump_size[i] * (jump - p_jump);
                    x.max(-0.95)
                })
                .collect()
        })
        .collect();
    let assets = (0..n).map(|i| format!("A{i:02}")).collect();
    let meta = (0..n).map(|i| AssetMeta { volume: Some(1e6 * (1.0 + i as f64)), ..AssetMeta::default() }).collect();
    ReturnsPanel::new(assets, ReturnSeries::new(dates, returns)?)?.with_meta(meta)
}

/// Realised annual volatilities used by the generator, for tests.
pub fn realised_vols(panel: &ReturnsPanel) -> Vec<f64> {
    let t = panel.weekly.len() as f64;
    (0..panel.n_assets())
        .map(|i| {
            let col: Vec<f64> = panel.weekly.returns.iter().map(|r| r[i]).collect();
            let m = col.iter().sum::<f64>() / t;
            (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (t - 1.0) * 52.0).sqrt()
        })
        .collect()
}
