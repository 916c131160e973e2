use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use isovol::diagnostics::ChainReport;
use isovol::pipeline::panel::{load_daily, load_metadata, AdmissionRules};
use isovol::pipeline::synthetic::{synthetic_panel, DownsideJumps, SyntheticConfig};
use isovol::pipeline::{
    backtest, load_panel, BacktestConfig, BacktestResult, LevelSamplerConfig, ReturnsPanel, ValueKind,
};
use isovol::rng::stream;
use isovol::walks::sample_component;
use isovol::{
    build_transform, estimate_volume, sample_patch, AnnealingConfig, PatchBody, PatchTransform, SimplexH, WalkConfig,
    WalkCounters,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Provenance, RunConfig};

const PSRF_GATE: f64 = 1.1;

/// A body on the sphere, with the portfolio map when it came from a covariance.
struct Source {
    body: PatchBody,
    transform: Option<PatchTransform>,
}

fn read_covariance(path: &Path) -> anyhow::Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| isovol::Error::MalformedCsv(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| isovol::Error::MalformedCsv(format!("bad number `{f}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(isovol::Error::MalformedCsv(format!("{} is not a square matrix", path.display())).into());
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn load_source(cfg: &RunConfig) -> anyhow::Result<Source> {
    let chosen = [cfg.simplex.is_some(), cfg.covariance.is_some(), cfg.regular.is_some()];
    if chosen.iter().filter(|&&c| c).count() != 1 {
        bail!("give exactly one of --simplex, --covariance or --regular");
    }
    if let Some(path) = &cfg.simplex {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let simplex: SimplexH = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(Source { body: PatchBody::new(simplex)?, transform: None });
    }
    if let Some(path) = &cfg.covariance {
        let level = cfg.level.context("--covariance needs --level")?;
        let cov = read_covariance(path)?;
        let transform = build_transform(&cov, level, cov.nrows())?;
        return Ok(Source { body: PatchBody::new(transform.simplex())?, transform: Some(transform) });
    }
    let d = cfg.regular.expect("checked above");
    let radius = cfg.radius.context("--regular needs --radius")?;
    Ok(Source { body: PatchBody::new(SimplexH::regular(d, radius)?)?, transform: None })
}

fn walk_config(cfg: &RunConfig) -> WalkConfig {
    let d = WalkConfig::default();
    WalkConfig {
        kind: cfg.walk.unwrap_or(d.kind),
        tau: cfg.tau,
        rho: cfg.rho,
        walk_length: cfg.walk_length.unwrap_or(d.walk_length),
        burn_in: cfg.burn_in.unwrap_or(d.burn_in),
    }
}

fn annealing(cfg: &RunConfig, default: AnnealingConfig) -> AnnealingConfig {
    AnnealingConfig { epsilon: cfg.epsilon.unwrap_or(default.epsilon), ..default }
}

/// Writer for `output`, or stdout.
fn sink(output: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match output {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json(out: &mut dyn Write, value: &Value) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn report_json(prov: &Provenance, command: &str, body: Value) -> Value {
    json!({ "provenance": prov, "command": command, "result": body })
}

pub fn components(cfg: &RunConfig) -> anyhow::Result<()> {
    let prov = Provenance::new(cfg)?;
    let src = load_source(cfg)?;
    let mut result = src.body.summary();
    if let Some(t) = &src.transform {
        result["level"] = json!(t.level());
        result["min_variance"] = json!(t.min_variance());
    }
    write_json(&mut *sink(&cfg.output)?, &report_json(&prov, "components", result))
}

pub fn sample(cfg: &RunConfig) -> anyhow::Result<()> {
    let seed = cfg.require_seed()?;
    let prov = Provenance::new(cfg)?;
    let n = cfg.n.context("--n is required")?;
    let Source { mut body, transform } = load_source(cfg)?;
    if body.is_empty() {
        return Err(isovol::Error::EmptyIntersection.into());
    }
    let weights = if body.n_components() > 1 {
        let anneal = annealing(cfg, LevelSamplerConfig::default().annealing);
        isovol::relative_volumes(&mut body, &anneal, seed)?.0
    } else {
        vec![1.0]
    };
    let (points, counters) = sample_patch(&body, n, &walk_config(cfg), &mut stream(seed, &[0x5A]))?;

    let mut out = sink(&cfg.output)?;
    out.write_all(prov.csv_comment().as_bytes())?;
    writeln!(out, "# weights {}", weights.iter().map(f64::to_string).collect::<Vec<_>>().join(" "))?;
    writeln!(out, "# steps {} budget_violations {}", counters.steps, counters.budget_violations)?;
    let (prefix, width) = match &transform {
        Some(t) => ("x", t.n_assets()),
        None => ("y", body.dim()),
    };
    let header: Vec<String> =
        std::iter::once("component".to_string()).chain((1..=width).map(|i| format!("{prefix}{i}"))).collect();
    writeln!(out, "{}", header.join(","))?;
    for s in &points {
        let coords = match &transform {
            Some(t) => t.from_patch(&s.point),
            None => s.point.clone(),
        };
        let row: Vec<String> =
            std::iter::once(s.component.to_string()).chain(coords.iter().map(f64::to_string)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn volume(cfg: &RunConfig) -> anyhow::Result<()> {
    let seed = cfg.require_seed()?;
    let prov = Provenance::new(cfg)?;
    let Source { body, .. } = load_source(cfg)?;
    if body.is_empty() {
        return Err(isovol::Error::EmptyIntersection.into());
    }
    let anneal = annealing(cfg, AnnealingConfig::default());
    let estimates = (0..body.n_components())
        .into_par_iter()
        .map(|i| estimate_volume(&body, i, &anneal, &mut stream(seed, &[0x701, i as u64])))
        .collect::<Result<Vec<_>, _>>()?;
    let total: f64 = estimates.iter().map(|e| e.volume).sum();
    let components: Vec<Value> = estimates
        .iter()
        .map(|e| {
            json!({
                "component": e.component,
                "volume": e.volume,
                "weight": e.volume / total,
                "phases": e.phases,
                "schedule": e.schedule,
                "log_ratios": e.log_ratios,
                "inside_fraction": e.inside_fraction,
                "samples": e.samples,
                "counters": e.counters,
            })
        })
        .collect();
    let result = json!({
        "dimension": body.dim(),
        "epsilon": anneal.epsilon,
        "total_volume": total,
        "components": components,
    });
    write_json(&mut *sink(&cfg.output)?, &report_json(&prov, "volume", result))
}

/// Points of a `sample` CSV, without the component column.
fn read_chain(path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let skip = usize::from(reader.headers()?.get(0) == Some("component"));
    let mut points = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| isovol::Error::MalformedCsv(e.to_string()))?;
        let row = rec
            .iter()
            .skip(skip)
            .map(|f| f.parse::<f64>().map_err(|_| isovol::Error::MalformedCsv(format!("bad number `{f}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        points.push(row);
    }
    Ok(points)
}

fn diagnose_files(cfg: &RunConfig, files: &[PathBuf]) -> anyhow::Result<bool> {
    let prov = Provenance::new(cfg)?;
    let chains = files.iter().map(|f| read_chain(f)).collect::<anyhow::Result<Vec<_>>>()?;
    let report = ChainReport::new(&chains, WalkCounters::default())?;
    let pass = report.max_psrf < PSRF_GATE;
    let result = json!({ "psrf_gate": PSRF_GATE, "pass": pass, "components": [report] });
    write_json(&mut *sink(&cfg.output)?, &report_json(&prov, "diagnose", result))?;
    Ok(pass)
}

/// Returns whether every component passed the PSRF gate.
pub fn diagnose(cfg: &RunConfig) -> anyhow::Result<bool> {
    if let Some(files) = &cfg.chain {
        return diagnose_files(cfg, files);
    }
    let seed = cfg.seed.unwrap_or(0);
    let prov = Provenance::new(cfg)?;
    let Source { body, .. } = load_source(cfg)?;
    let chains = cfg.chains.unwrap_or(8);
    let length = cfg.length.unwrap_or(10_000);
    if chains < 2 || length < 2 {
        bail!("diagnose needs at least 2 chains of length 2");
    }
    let walk = walk_config(cfg);
    let reports = (0..body.n_components())
        .map(|c| {
            let runs = (0..chains)
                .into_par_iter()
                .map(|j| sample_component(&body, c, length, &walk, stream(seed, &[0xD1A6, c as u64, j as u64])))
                .collect::<Result<Vec<_>, _>>()?;
            let mut counters = WalkCounters::default();
            let series: Vec<Vec<Vec<f64>>> = runs
                .into_iter()
                .map(|(pts, ctr)| {
                    counters.merge(&ctr);
                    pts.iter().map(|p| p.iter().copied().collect()).collect()
                })
                .collect();
            Ok(ChainReport::new(&series, counters)?)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let pass = reports.iter().all(|r| r.max_psrf < PSRF_GATE);
    let result = json!({
        "walk": walk,
        "psrf_gate": PSRF_GATE,
        "pass": pass,
        "components": reports,
    });
    write_json(&mut *sink(&cfg.output)?, &report_json(&prov, "diagnose", result))?;
    Ok(pass)
}

fn load_backtest_panel(cfg: &RunConfig, seed: u64) -> anyhow::Result<ReturnsPanel> {
    match (&cfg.panel, cfg.synthetic_assets) {
        (Some(_), Some(_)) => bail!("give either --panel or --synthetic-assets, not both"),
        (None, None) => bail!("--panel or --synthetic-assets is required"),
        (None, Some(n)) => {
            let d = SyntheticConfig::default();
            let jumps = cfg
                .synthetic_jump_share
                .map(|share| DownsideJumps { variance_share: share, ..DownsideJumps::default() });
            let sc = SyntheticConfig { n_assets: n, years: cfg.synthetic_years.unwrap_or(d.years), jumps, ..d };
            Ok(synthetic_panel(&sc, seed)?)
        }
        (Some(path), None) => {
            let kind = cfg.values.unwrap_or(ValueKind::Prices);
            let mut panel = load_panel(path, kind)?;
            if let Some(daily) = &cfg.daily {
                panel = load_daily(panel, daily, kind)?;
            }
            if let Some(meta) = &cfg.metadata {
                panel = load_metadata(panel, meta)?;
            }
            Ok(panel)
        }
    }
}

pub fn backtest_config(cfg: &RunConfig) -> BacktestConfig {
    let d = BacktestConfig::default();
    let sampler = LevelSamplerConfig::default();
    BacktestConfig {
        samples_per_level: cfg.samples_per_level.unwrap_or(d.samples_per_level),
        mode: cfg.mode.unwrap_or(d.mode),
        rules: AdmissionRules { min_volume: cfg.min_volume, ..d.rules },
        sampler: LevelSamplerConfig {
            walk: WalkConfig {
                kind: cfg.walk.unwrap_or(sampler.walk.kind),
                tau: cfg.tau,
                rho: cfg.rho,
                walk_length: cfg.walk_length.unwrap_or(sampler.walk.walk_length),
                burn_in: cfg.burn_in.unwrap_or(sampler.walk.burn_in),
            },
            annealing: annealing(cfg, sampler.annealing),
        },
        sharpe: cfg.sharpe.unwrap_or(d.sharpe),
        risk_free: cfg.risk_free.unwrap_or(d.risk_free),
    }
}

fn format_f64(x: f64) -> String {
    x.to_string()
}

fn write_backtest(dir: &Path, prov: &Provenance, config: &BacktestConfig, res: &BacktestResult) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut stats = BufWriter::new(File::create(dir.join("stats.csv"))?);
    stats.write_all(prov.csv_comment().as_bytes())?;
    writeln!(stats, "level,sample,annual_return,annual_std,sharpe")?;
    for l in &res.levels {
        for (p, s) in l.stats.iter().enumerate() {
            writeln!(
                stats,
                "{},{},{},{},{}",
                l.level + 1,
                p,
                format_f64(s.annual_return),
                format_f64(s.annual_std),
                format_f64(s.sharpe)
            )?;
        }
    }
    stats.flush()?;

    let mut monthly = BufWriter::new(File::create(dir.join("monthly_mean.csv"))?);
    monthly.write_all(prov.csv_comment().as_bytes())?;
    let header: Vec<String> = res.levels.iter().map(|l| format!("level{}", l.level + 1)).collect();
    writeln!(monthly, "month,{}", header.join(","))?;
    let means: Vec<Vec<f64>> = res.levels.iter().map(|l| l.mean_series()).collect();
    for (t, (y, m)) in res.months.iter().enumerate() {
        let row: Vec<String> = means.iter().map(|s| format_f64(s[t])).collect();
        writeln!(monthly, "{y}-{m:02},{}", row.join(","))?;
    }
    monthly.flush()?;

    let clusters = res.cluster_summaries().ok();
    let tests = res.sharpe_tests().ok();
    let formations: Vec<Value> = res
        .formations
        .iter()
        .map(|f| {
            json!({
                "date": f.date.to_string(),
                "n_assets": f.assets.len(),
                "targets": f.levels.targets,
                "permutation": f.levels.permutation,
                "shrinkage": f.shrinkage,
                "n_components": f.n_components,
                "counters": f.counters,
            })
        })
        .collect();
    let levels: Vec<Value> = res
        .levels
        .iter()
        .map(|l| json!({ "level": l.level + 1, "paths": l.stats.len(), "mean_sharpe": l.mean_sharpe() }))
        .collect();
    let summary = report_json(
        prov,
        "backtest",
        json!({
            "config": config,
            "months": res.months.len(),
            "levels": levels,
            "cluster_summaries": clusters,
            "sharpe_tests_vs_level1": tests,
            "formations": formations,
        }),
    );
    let mut out = BufWriter::new(File::create(dir.join("summary.json"))?);
    write_json(&mut out, &summary)
}

pub fn run_backtest(cfg: &RunConfig) -> anyhow::Result<()> {
    let seed = cfg.require_seed()?;
    let prov = Provenance::new(cfg)?;
    let panel = load_backtest_panel(cfg, seed)?;
    let config = backtest_config(cfg);
    let res = backtest(&panel, &config, seed)?;
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("backtest-out"));
    write_backtest(&dir, &prov, &config, &res)
}
