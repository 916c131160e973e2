mod common;

use common::*;
use isovol::pipeline::backtest::form_portfolios;
use isovol::pipeline::cluster::cluster_summary;
use isovol::pipeline::covariance::{estimate_covariance, volatilities};
use isovol::pipeline::sharpe::sharpe_test;
use isovol::pipeline::stats::performance_stats;
use isovol::pipeline::synthetic::{synthetic_panel, SyntheticConfig};
use isovol::pipeline::targets::quintile_targets;
use isovol::pipeline::{backtest, sample_level, BacktestConfig, ConcatMode, LevelSamplerConfig, SharpeConvention};
use isovol::rng::stream;
use isovol::Error;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut isovol::rng::Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[test]
fn shrinkage_is_consistent_for_iid_returns() {
    let mut rng = stream(71, &[]);
    let (t, p) = (5000, 6);
    let rows: Vec<Vec<f64>> = (0..t).map(|_| (0..p).map(|_| normal(&mut rng)).collect()).collect();
    let est = estimate_covariance(&rows).unwrap();
    let sd = (1.0 / t as f64).sqrt();
    for i in 0..p {
        for j in 0..p {
            let truth = if i == j { 1.0 } else { 0.0 };
            let tol = if i == j { 3.0 * 2f64.sqrt() * sd } else { 3.0 * sd };
            assert!((est.covariance[(i, j)] - truth).abs() < tol, "({i},{j}) {}", est.covariance[(i, j)]);
            assert!((est.covariance[(i, j)] - est.sample[(i, j)]).abs() < tol);
        }
    }
}

#[test]
fn shrinkage_recovers_factor_loadings() {
    let mut rng = stream(72, &[]);
    let (t, p) = (400, 20);
    let loadings = DVector::from_fn(p, |_, _| rng.random_range(0.5..1.5));
    let rows: Vec<Vec<f64>> = (0..t)
        .map(|_| {
            let f = normal(&mut rng);
            (0..p).map(|i| loadings[i] * f + 0.5 * normal(&mut rng)).collect()
        })
        .collect();
    let cov = estimate_covariance(&rows).unwrap().covariance;
    let eig = SymmetricEigen::new(cov);
    let top = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(top);
    let corr = v.dot(&loadings).abs() / loadings.norm();
    assert!(corr > 0.95, "corr {corr}");
}

#[test]
fn shrinkage_keeps_wide_panels_definite() {
    let mut rng = stream(73, &[]);
    let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..80).map(|_| normal(&mut rng)).collect()).collect();
    let est = estimate_covariance(&rows).unwrap();
    assert!(SymmetricEigen::new(est.covariance).eigenvalues.min() > 0.0);
    assert!(est.intensity > 0.0 && est.intensity <= 1.0);
}

#[test]
fn quintile_targets_match_brute_force() {
    let mut rng = stream(74, &[]);
    for n in [5, 12, 23, 30] {
        let g = DMatrix::from_fn(n, n, |_, _| normal(&mut rng));
        let cov = &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * 0.1;
        let vols: Vec<f64> = (0..n).map(|i| cov[(i, i)].sqrt()).collect();
        let levels = quintile_targets(&cov, &vols).unwrap();
        // Brute force: sort by vol, split with remainder to low groups, equal weights.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| vols[a].partial_cmp(&vols[b]).unwrap());
        let mut raw = Vec::new();
        let mut start = 0;
        for m in 0..5 {
            let size = n / 5 + usize::from(m < n % 5);
            let group = &order[start..start + size];
            start += size;
            let mut v = 0.0;
            for &i in group {
                for &j in group {
                    v += cov[(i, j)] / (size * size) as f64;
                }
            }
            raw.push(v);
        }
        let mut sorted = raw.clone();
        sorted.sort_by(f64::total_cmp);
        for (a, b) in levels.targets.iter().zip(&sorted) {
            assert!((a - b).abs() < 1e-12);
        }
        for (m, &g) in levels.permutation.iter().enumerate() {
            assert!((levels.targets[m] - raw[g]).abs() < 1e-12);
        }
    }
}

#[test]
fn quintile_targets_for_identity() {
    let levels = quintile_targets(&DMatrix::identity(10, 10), &[1.0; 10]).unwrap();
    assert!(levels.targets.iter().all(|&c| (c - 0.5).abs() < 1e-15));
}

#[test]
fn sharpe_of_known_moments() {
    // Mean 0.01 and sample standard deviation 0.05 exactly.
    let n = 24;
    let s = 0.05 * ((n as f64 - 1.0) / n as f64).sqrt();
    let monthly: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.01 + s } else { 0.01 - s }).collect();
    let stats = performance_stats(&monthly, &vec![0.0; n], SharpeConvention::Arithmetic).unwrap();
    assert!((stats.sharpe - 0.12 / 0.173205).abs() < 1e-5);
    assert!((stats.sharpe - 0.69282).abs() < 1e-5);
    assert!((stats.annual_std - 0.05 * 12f64.sqrt()).abs() < 1e-12);
}

#[test]
fn sharpe_test_rejects_planted_gap_more_than_null() {
    let mut rng = stream(75, &[]);
    let months = 240;
    let sims = 300;
    let mut null_rejects = 0;
    let mut gap_rejects = 0;
    for _ in 0..sims {
        let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..months {
            let common = normal(&mut rng);
            let (ea, eb) = (normal(&mut rng), normal(&mut rng));
            let x = 0.05 * (0.5f64.sqrt() * common + 0.5f64.sqrt() * ea);
            let y = 0.05 * (0.5f64.sqrt() * common + 0.5f64.sqrt() * eb);
            a.push(0.01 + x);
            b.push(0.01 + y);
            // Annual Sharpe 0.5 lower: 0.5 / sqrt(12) monthly standard deviations.
            c.push(0.01 - 0.05 * 0.5 / 12f64.sqrt() + y);
        }
        null_rejects += usize::from(sharpe_test(&a, &b).unwrap().p_value < 0.05);
        gap_rejects += usize::from(sharpe_test(&a, &c).unwrap().p_value < 0.05);
    }
    let size = null_rejects as f64 / sims as f64;
    let power = gap_rejects as f64 / sims as f64;
    assert!(size < 0.1, "size {size}");
    assert!(power > 0.5, "power {power}");
}

#[test]
fn planted_negative_cluster_has_negative_correlation() {
    let mut rng = stream(76, &[]);
    let pairs: Vec<[f64; 2]> = (0..200)
        .map(|_| {
            let risk = rng.random_range(0.1..0.3);
            [risk, 0.2 - 0.5 * risk + 0.01 * normal(&mut rng)]
        })
        .collect();
    let s = cluster_summary(1, &pairs).unwrap();
    assert!(s.correlation < -0.8);
    assert!(pairs.iter().all(|&p| s.contains(p)));
}

fn positive_definite(n: usize, rng: &mut isovol::rng::Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| normal(rng));
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * 0.2
}

#[test]
fn sampled_portfolios_satisfy_the_contract() {
    let mut rng = stream(77, &[]);
    for n in [3, 5, 9] {
        let cov = positive_definite(n, &mut rng);
        let vols: Vec<f64> = (0..n).map(|i| cov[(i, i)].sqrt()).collect();
        let level = 0.5 * (vols.iter().map(|v| v * v).fold(f64::INFINITY, f64::min) + cov.diagonal().mean() / n as f64);
        let Ok(sample) = sample_level(&cov, level, 200, &LevelSamplerConfig::default(), &mut rng) else { continue };
        for x in &sample.portfolios {
            assert!((x.sum() - 1.0).abs() < 1e-10);
            assert!(x.min() >= -1e-10);
            assert!(((x.transpose() * &cov * x)[0] - level).abs() < 1e-8);
        }
    }
}

#[test]
fn level_samples_match_banded_rejection() {
    // Five assets: the level set is a 3-sphere patch.
    let mut rng = stream(78, &[]);
    let cov = positive_definite(5, &mut rng);
    let ones = DVector::from_element(5, 1.0);
    let c_min = 1.0 / ones.dot(&cov.clone().cholesky().unwrap().solve(&ones));
    let gmv = cov.clone().cholesky().unwrap().solve(&ones) * c_min;
    // Halfway between the minimum variance and the least risky single asset.
    let level = c_min + 0.5 * (cov.diagonal().min() - c_min);

    let config = LevelSamplerConfig::default();
    let ours = sample_level(&cov, level, 4000, &config, &mut stream(78, &[1])).unwrap();

    // Uniform points of the simplex in a thin variance band, pushed radially from
    // the minimum-variance portfolio onto the level set.
    let band = 0.01 * (level - c_min);
    let mut oracle = Vec::new();
    while oracle.len() < 4000 {
        let e: Vec<f64> = (0..5).map(|_| -rng.random::<f64>().ln()).collect();
        let s: f64 = e.iter().sum();
        let x = DVector::from_iterator(5, e.iter().map(|v| v / s));
        let var = (x.transpose() * &cov * &x)[0];
        if (var - level).abs() < band {
            let dir = &x - &gmv;
            let scale = ((level - c_min) / (dir.transpose() * &cov * &dir)[0]).sqrt();
            oracle.push(&gmv + dir * scale);
        }
    }
    for coord in 0..5 {
        let a: Vec<f64> = ours.portfolios.iter().map(|x| x[coord]).collect();
        let b: Vec<f64> = oracle.iter().map(|x| x[coord]).collect();
        let (_, p) = ks_two_sample(&a, &b);
        assert!(p > 0.01, "coordinate {coord}: p={p}");
    }
}

fn small_panel_config() -> (SyntheticConfig, BacktestConfig) {
    let syn = SyntheticConfig { n_assets: 8, years: 7, ..SyntheticConfig::default() };
    let cfg = BacktestConfig { samples_per_level: 6, ..BacktestConfig::default() };
    (syn, cfg)
}

#[test]
fn formations_ignore_future_data() {
    let (syn, cfg) = small_panel_config();
    let panel = synthetic_panel(&syn, 7).unwrap();
    let base = form_portfolios(&panel, &cfg, 3).unwrap();
    let k = base.len() / 2;
    let row = base[k].row;
    let mut corrupted = panel.clone();
    let mut rng = stream(79, &[]);
    for r in &mut corrupted.weekly.returns[row..] {
        for v in r.iter_mut() {
            *v = rng.random_range(-0.5..2.0);
        }
    }
    let again = form_portfolios(&corrupted, &cfg, 3).unwrap();
    for j in 0..=k {
        assert_eq!(again[j].levels, base[j].levels);
        assert_eq!(again[j].portfolios, base[j].portfolios);
        assert_eq!(again[j].assets, base[j].assets);
    }
    assert_ne!(again.last().unwrap().levels, base.last().unwrap().levels);
}

#[test]
fn concatenation_modes_share_segments() {
    let (syn, cfg) = small_panel_config();
    let panel = synthetic_panel(&syn, 8).unwrap();
    let formations = form_portfolios(&panel, &cfg, 4).unwrap();
    let random = isovol::pipeline::backtest::run_backtest(&panel, &cfg, 4, formations.clone()).unwrap();
    let momentum_cfg = BacktestConfig { mode: ConcatMode::Momentum, ..cfg.clone() };
    let momentum = isovol::pipeline::backtest::run_backtest(&panel, &momentum_cfg, 4, formations).unwrap();
    assert_eq!(random.segments, momentum.segments);
    assert_eq!(random.months, momentum.months);
    let n = cfg.samples_per_level;
    for (lr, lm) in random.levels.iter().zip(&momentum.levels) {
        for pairing in lr.pairing.iter().chain(&lm.pairing) {
            let mut p = pairing.clone();
            p.sort_unstable();
            assert_eq!(p, (0..n).collect::<Vec<_>>());
        }
        // Same monthly multiset in the first quarter; only the pairing differs later.
        assert_eq!(lr.monthly.len(), lm.monthly.len());
        assert!(lr.monthly.iter().all(|m| m.len() == random.months.len()));
    }
    assert_ne!(
        random.levels.iter().map(|l| &l.pairing).collect::<Vec<_>>(),
        momentum.levels.iter().map(|l| &l.pairing).collect::<Vec<_>>()
    );
}

#[test]
fn missing_holding_data_is_a_coverage_gap() {
    let (syn, cfg) = small_panel_config();
    let mut panel = synthetic_panel(&syn, 9).unwrap();
    let formations = form_portfolios(&panel, &cfg, 5).unwrap();
    let f = &formations[1];
    let asset = f.assets[0];
    panel.weekly.returns[f.row + 2][asset] = f64::NAN;
    let err = isovol::pipeline::backtest::run_backtest(&panel, &cfg, 5, formations).unwrap_err();
    assert!(matches!(err, Error::CoverageGap { .. }), "{err:?}");
}

#[test]
fn backtests_are_reproducible_and_zero_returns_give_zero_statistics() {
    let (syn, cfg) = small_panel_config();
    let panel = synthetic_panel(&syn, 10).unwrap();
    assert_eq!(backtest(&panel, &cfg, 6).unwrap(), backtest(&panel, &cfg, 6).unwrap());

    let mut flat = panel.clone();
    let mut rng = stream(80, &[]);
    // Non-degenerate estimation history, then nothing moves.
    let first = form_portfolios(&panel, &cfg, 6).unwrap()[0].row;
    for (t, r) in flat.weekly.returns.iter_mut().enumerate() {
        for v in r.iter_mut() {
            *v = if t < first { 0.02 * normal(&mut rng) } else { 0.0 };
        }
    }
    let formations = form_portfolios(&flat, &cfg, 6).unwrap();
    let zeros = BacktestConfig { ..cfg.clone() };
    let result = isovol::pipeline::backtest::run_backtest(&flat, &zeros, 6, formations[..5].to_vec()).unwrap();
    for level in &result.levels {
        for s in &level.stats {
            assert_eq!((s.annual_return, s.annual_std), (0.0, 0.0));
        }
    }
}

#[test]
fn single_asset_paths_are_identical() {
    let cov = DMatrix::from_element(1, 1, 0.04);
    let s = sample_level(&cov, 0.04, 10, &LevelSamplerConfig::default(), &mut stream(81, &[])).unwrap();
    assert!(s.portfolios.iter().all(|x| x == &DVector::from_element(1, 1.0)));
    let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![0.01 * (i % 3) as f64, 0.0]).collect();
    assert_eq!(volatilities(&rows)[1], 0.0);
}
