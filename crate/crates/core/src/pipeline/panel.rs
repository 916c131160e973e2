//! Return panels: CSV ingestion, price conversion and admission rules.

use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weekly returns in one estimation window.
pub const ESTIMATION_WINDOW: usize = 260;
/// Longest admissible run of consecutive missing observations.
pub const MAX_GAP: usize = 2;
/// Default liquidity threshold in currency units.
pub const DEFAULT_MIN_VOLUME: f64 = 1.5e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Prices,
    Returns,
}

impl std::str::FromStr for ValueKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prices" | "price" => Ok(Self::Prices),
            "returns" | "return" => Ok(Self::Returns),
            other => Err(Error::InvalidArgument(format!("unknown value kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeBucket {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectorBucket {
    Defensive,
    Cyclical,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssetMeta {
    pub size: Option<SizeBucket>,
    pub sector: Option<SectorBucket>,
    /// Median trading volume in currency units.
    pub volume: Option<f64>,
}

/// Dated returns with missing observations stored as NaN, one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub dates: Vec<NaiveDate>,
    /// `returns[t][i]`.
    pub returns: Vec<Vec<f64>>,
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, returns: Vec<Vec<f64>>) -> Result<Self> {
        if dates.len() != returns.len() {
            return Err(Error::DimensionMismatch { expected: dates.len(), got: returns.len() });
        }
        let width = returns.first().map_or(0, Vec::len);
        for (t, row) in returns.iter().enumerate() {
            if row.len() != width {
                return Err(Error::MalformedCsv(format!("row {t} has {} values, expected {width}", row.len())));
            }
            if let Some(r) = row.iter().find(|r| **r <= -1.0) {
                return Err(Error::MalformedCsv(format!("return {r} at row {t} is not above -1")));
            }
        }
        check_monotone(&dates)?;
        Ok(Self { dates, returns })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_assets(&self) -> usize {
        self.returns.first().map_or(0, Vec::len)
    }

    /// First row with date `>= date`.
    pub fn index_at(&self, date: NaiveDate) -> usize {
        self.dates.partition_point(|d| *d < date)
    }
}

fn check_monotone(dates: &[NaiveDate]) -> Result<()> {
    match dates.windows(2).position(|w| w[1] <= w[0]) {
        Some(i) => Err(Error::NonMonotoneDates(i + 1)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    pub assets: Vec<String>,
    pub weekly: ReturnSeries,
    /// Finer series used for holding-period returns when present.
    pub daily: Option<ReturnSeries>,
    pub meta: Vec<AssetMeta>,
}

impl ReturnsPanel {
    pub fn new(assets: Vec<String>, weekly: ReturnSeries) -> Result<Self> {
        if weekly.n_assets() != assets.len() && !weekly.is_empty() {
            return Err(Error::DimensionMismatch { expected: assets.len(), got: weekly.n_assets() });
        }
        let meta = vec![AssetMeta::default(); assets.len()];
        Ok(Self { assets, weekly, daily: None, meta })
    }

    pub fn with_daily(mut self, daily: ReturnSeries) -> Result<Self> {
        if daily.n_assets() != self.assets.len() {
            return Err(Error::DimensionMismatch { expected: self.assets.len(), got: daily.n_assets() });
        }
        self.daily = Some(daily);
        Ok(self)
    }

    pub fn with_meta(mut self, meta: Vec<AssetMeta>) -> Result<Self> {
        if meta.len() != self.assets.len() {
            return Err(Error::DimensionMismatch { expected: self.assets.len(), got: meta.len() });
        }
        self.meta = meta;
        Ok(self)
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Series used for holding periods.
    pub fn holding(&self) -> &ReturnSeries {
        self.daily.as_ref().unwrap_or(&self.weekly)
    }

    /// Rows of the weekly series that open a calendar quarter and have a full
    /// estimation window before them.
    pub fn quarter_starts(&self, window: usize) -> Vec<usize> {
        let dates = &self.weekly.dates;
        (1..dates.len())
            .filter(|&t| {
                let (a, b) = (dates[t - 1], dates[t]);
                quarter_of(a) != quarter_of(b) && t >= window
            })
            .collect()
    }

    /// Assets whose window `[row - window, row)` has no missing run longer than
    /// `max_gap` and that pass the optional liquidity rule.
    pub fn admitted(&self, row: usize, rules: &AdmissionRules) -> Vec<usize> {
        if row < rules.window {
            return Vec::new();
        }
        let rows = &self.weekly.returns[row - rules.window..row];
        (0..self.n_assets())
            .filter(|&i| {
                let mut run = 0;
                let mut longest = 0;
                let mut observed = 0;
                for r in rows {
                    if r[i].is_nan() {
                        run += 1;
                        longest = longest.max(run);
                    } else {
                        run = 0;
                        observed += 1;
                    }
                }
                longest <= rules.max_gap && observed > 0
            })
            .filter(|&i| match (rules.min_volume, self.meta[i].volume) {
                (Some(min), Some(v)) => v >= min,
                (Some(_), None) => false,
                (None, _) => true,
            })
            .collect()
    }

    /// Estimation window for the given assets with missing values read as zero returns.
    pub fn window(&self, row: usize, window: usize, assets: &[usize]) -> Vec<Vec<f64>> {
        self.weekly.returns[row - window..row]
            .iter()
            .map(|r| assets.iter().map(|&i| if r[i].is_nan() { 0.0 } else { r[i] }).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissionRules {
    pub window: usize,
    pub max_gap: usize,
    pub min_volume: Option<f64>,
}

impl Default for AdmissionRules {
    fn default() -> Self {
        Self { window: ESTIMATION_WINDOW, max_gap: MAX_GAP, min_volume: None }
    }
}

pub fn quarter_of(d: NaiveDate) -> (i32, u32) {
    (d.year(), (d.month() - 1) / 3)
}

fn parse_date(s: &str, row: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::MalformedCsv(format!("row {row}: bad date `{s}`: {e}")))
}

fn parse_value(s: &str, row: usize) -> Result<f64> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    let v: f64 = s.parse().map_err(|_| Error::MalformedCsv(format!("row {row}: bad number `{s}`")))?;
    if !v.is_finite() {
        return Err(Error::MalformedCsv(format!("row {row}: non-finite value `{s}`")));
    }
    Ok(v)
}

/// Asset names and series from a CSV with a date column followed by one column per asset.
pub fn read_series<R: std::io::Read>(reader: R, kind: ValueKind) -> Result<(Vec<String>, ReturnSeries)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::MalformedCsv("expected a date column and at least one asset column".into()));
    }
    let assets: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::MalformedCsv(format!("row {row} has {} fields, expected {}", rec.len(), header.len())));
        }
        dates.push(parse_date(&rec[0], row)?);
        values.push(rec.iter().skip(1).map(|s| parse_value(s, row)).collect::<Result<Vec<f64>>>()?);
    }
    check_monotone(&dates)?;
    let returns = match kind {
        ValueKind::Returns => values,
        ValueKind::Prices => prices_to_returns(&values)?,
    };
    Ok((assets, ReturnSeries::new(dates, returns)?))
}

/// Discrete returns from prices. A return is measured against the last observed
/// price, so gaps do not lose compounding; the first observation has no return.
pub fn prices_to_returns(prices: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = prices.first().map_or(0, Vec::len);
    let mut last = vec![f64::NAN; n];
    let mut out = Vec::with_capacity(prices.len());
    for (t, row) in prices.iter().enumerate() {
        let mut r = vec![f64::NAN; n];
        for i in 0..n {
            let p = row[i];
            if p.is_nan() {
                continue;
            }
            if p <= 0.0 {
                return Err(Error::MalformedCsv(format!("non-positive price {p} at row {t}")));
            }
            if !last[i].is_nan() {
                r[i] = p / last[i] - 1.0;
            }
            last[i] = p;
        }
        out.push(r);
    }
    Ok(out)
}

pub fn load_panel(path: &Path, kind: ValueKind) -> Result<ReturnsPanel> {
    let file = std::fs::File::open(path)?;
    let (assets, series) = read_series(file, kind)?;
    ReturnsPanel::new(assets, series)
}

/// Attach a finer holding-period series with the same asset columns.
pub fn load_daily(panel: ReturnsPanel, path: &Path, kind: ValueKind) -> Result<ReturnsPanel> {
    let (assets, series) = read_series(std::fs::File::open(path)?, kind)?;
    if assets != panel.assets {
        return Err(Error::MalformedCsv("daily series columns differ from the weekly panel".into()));
    }
    panel.with_daily(series)
}

#[derive(Debug, Deserialize)]
struct MetaRow {
    asset: String,
    size: Option<String>,
    sector: Option<String>,
    volume: Option<f64>,
}

/// Metadata CSV with columns `asset,size,sector,volume`; unknown assets are ignored.
pub fn load_metadata(panel: ReturnsPanel, path: &Path) -> Result<ReturnsPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut meta = panel.meta.clone();
    for rec in rdr.deserialize::<MetaRow>() {
        let rec = rec?;
        let Some(i) = panel.assets.iter().position(|a| *a == rec.asset) else { continue };
        let size = match rec.size.as_deref().map(str::to_ascii_lowercase).as_deref() {
            None | Some("") => None,
            Some("small") => Some(SizeBucket::Small),
            Some("large") => Some(SizeBucket::Large),
            Some(o) => return Err(Error::MalformedCsv(format!("unknown size bucket `{o}`"))),
        };
        let sector = match rec.sector.as_deref().map(str::to_ascii_lowercase).as_deref() {
            None | Some("") => None,
            Some("defensive") => Some(SectorBucket::Defensive),
            Some("cyclical") => Some(SectorBucket::Cyclical),
            Some(o) => return Err(Error::MalformedCsv(format!("unknown sector bucket `{o}`"))),
        };
        meta[i] = AssetMeta { size, sector, volume: rec.volume };
    }
    panel.with_meta(meta)
}

pub fn write_series<W: std::io::Write>(writer: W, assets: &[String], series: &ReturnSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(assets.iter().cloned());
    w.write_record(&header)?;
    for (d, row) in series.dates.iter().zip(&series.returns) {
        let mut rec = vec![d.format("%Y-%m-%d").to_string()];
        rec.extend(row.iter().map(|v| if v.is_nan() { String::new() } else { format!("{v:e}") }));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
