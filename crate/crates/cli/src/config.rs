//! Run configuration: a TOML or JSON file merged under command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use isovol::pipeline::{ConcatMode, SharpeConvention, ValueKind};
use isovol::WalkKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// TOML or JSON file with any of these options; flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Simplex as JSON `{"normals": [[..]..], "offsets": [..]}`.
    #[arg(long, help_heading = "Body")]
    pub simplex: Option<PathBuf>,
    /// Covariance matrix as a headerless CSV; needs `--level`.
    #[arg(long, help_heading = "Body")]
    pub covariance: Option<PathBuf>,
    /// Portfolio variance level.
    #[arg(long, help_heading = "Body")]
    pub level: Option<f64>,
    /// Dimension of a regular simplex centred at the origin; needs `--radius`.
    #[arg(long, help_heading = "Body")]
    pub regular: Option<usize>,
    /// Circumradius of the regular simplex.
    #[arg(long, help_heading = "Body")]
    pub radius: Option<f64>,

    /// `regcw` or `gcw`.
    #[arg(long, help_heading = "Walk")]
    pub walk: Option<WalkKind>,
    #[arg(long, help_heading = "Walk")]
    pub tau: Option<f64>,
    /// Reflection budget per step.
    #[arg(long, help_heading = "Walk")]
    pub rho: Option<usize>,
    #[arg(long, help_heading = "Walk")]
    pub walk_length: Option<usize>,
    #[arg(long, help_heading = "Walk")]
    pub burn_in: Option<usize>,

    /// Target relative error of volume estimates.
    #[arg(long, help_heading = "Volume")]
    pub epsilon: Option<f64>,

    /// Number of points to sample.
    #[arg(short, long)]
    pub n: Option<usize>,
    /// Chains for `diagnose`.
    #[arg(long, help_heading = "Diagnostics")]
    pub chains: Option<usize>,
    /// Samples per chain for `diagnose`.
    #[arg(long, help_heading = "Diagnostics")]
    pub length: Option<usize>,
    /// Sample CSVs (as written by `sample`) to diagnose, one chain per file.
    #[arg(long = "chain", num_args = 1.., help_heading = "Diagnostics")]
    pub chain: Option<Vec<PathBuf>>,

    /// Weekly prices or returns CSV (date column plus one column per asset).
    #[arg(long, help_heading = "Backtest")]
    pub panel: Option<PathBuf>,
    /// Optional daily series used for holding-period returns.
    #[arg(long, help_heading = "Backtest")]
    pub daily: Option<PathBuf>,
    /// Asset metadata CSV (asset, size, sector, volume).
    #[arg(long, help_heading = "Backtest")]
    pub metadata: Option<PathBuf>,
    /// Whether the panel holds `prices` or `returns`.
    #[arg(long, help_heading = "Backtest")]
    pub values: Option<ValueKind>,
    #[arg(long, help_heading = "Backtest")]
    pub samples_per_level: Option<usize>,
    /// `random` or `momentum` path concatenation.
    #[arg(long, help_heading = "Backtest")]
    pub mode: Option<ConcatMode>,
    /// Median-volume admission threshold; off when absent.
    #[arg(long, help_heading = "Backtest")]
    pub min_volume: Option<f64>,
    /// Constant monthly risk-free rate.
    #[arg(long, help_heading = "Backtest")]
    pub risk_free: Option<f64>,
    /// `arithmetic` or `geometric` Sharpe ratio.
    #[arg(long, help_heading = "Backtest")]
    pub sharpe: Option<SharpeConvention>,
    /// Generate a synthetic panel with this many assets instead of reading one.
    #[arg(long, help_heading = "Backtest")]
    pub synthetic_assets: Option<usize>,
    #[arg(long, help_heading = "Backtest")]
    pub synthetic_years: Option<usize>,
    /// Share of synthetic asset variance coming from idiosyncratic downside jumps.
    #[arg(long, help_heading = "Backtest")]
    pub synthetic_jump_share: Option<f64>,

    /// Output file, or directory for `backtest`; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

macro_rules! prefer {
    ($a:ident, $b:ident; $($f:ident),* $(,)?) => {
        RunConfig { config: $a.config, $($f: $a.$f.or($b.$f)),* }
    };
}

impl RunConfig {
    /// Flags layered over the config file, if one was given.
    pub fn resolve(self) -> anyhow::Result<Self> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let file = Self::from_file(&path)?;
        let flags = self;
        Ok(prefer!(flags, file;
            seed, simplex, covariance, level, regular, radius, walk, tau, rho, walk_length, burn_in,
            epsilon, n, chains, length, chain, panel, daily, metadata, values, samples_per_level, mode,
            min_volume, risk_free, sharpe, synthetic_assets, synthetic_years, synthetic_jump_share, output,
        ))
    }

    fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
            _ => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        };
        // Relative paths in a config file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        let chains = cfg.chain.iter_mut().flatten().map(Some);
        let singles =
            [&mut cfg.simplex, &mut cfg.covariance, &mut cfg.panel, &mut cfg.daily, &mut cfg.metadata, &mut cfg.output]
                .into_iter()
                .map(Option::as_mut);
        for p in singles.chain(chains).flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn require_seed(&self) -> anyhow::Result<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => bail!("--seed is required for this command"),
        }
    }

    /// SHA-256 over the effective settings and the bytes of every input file.
    /// Seed, output location and thread count are excluded.
    pub fn hash(&self) -> anyhow::Result<String> {
        let mut settings = self.clone();
        settings.seed = None;
        settings.output = None;
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&settings)?);
        let singles = [&self.simplex, &self.covariance, &self.panel, &self.daily, &self.metadata].into_iter().flatten();
        for p in singles.chain(self.chain.iter().flatten()) {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        Ok(hex::encode(h.finalize()))
    }
}

/// Provenance stamped on every output.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(config: &RunConfig) -> anyhow::Result<Self> {
        Ok(Self { tool: "isovol", version: env!("CARGO_PKG_VERSION"), config_hash: config.hash()?, seed: config.seed })
    }

    /// `#`-prefixed lines for CSV outputs.
    pub fn csv_comment(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!("# {} {}\n# config_hash {}\n# seed {}\n", self.tool, self.version, self.config_hash, seed)
    }
}
