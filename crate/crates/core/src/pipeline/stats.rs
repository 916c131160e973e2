//! Annualised performance statistics on monthly returns.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_MONTHS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SharpeConvention {
    /// Mean monthly excess return times 12.
    #[default]
    Arithmetic,
    /// Geometric annualised excess return.
    Geometric,
}

impl std::str::FromStr for SharpeConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arithmetic" => Ok(Self::Arithmetic),
            "geometric" => Ok(Self::Geometric),
            other => Err(Error::InvalidArgument(format!("unknown Sharpe convention `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceStats {
    pub annual_return: f64,
    pub annual_std: f64,
    /// `±inf` when the excess return is nonzero and the std is zero, NaN when both vanish.
    pub sharpe: f64,
}

/// Calendar-month returns from dated period returns, compounded within each month.
pub fn monthly_returns(dates: &[NaiveDate], returns: &[f64]) -> (Vec<(i32, u32)>, Vec<f64>) {
    let mut months: Vec<(i32, u32)> = Vec::new();
    let mut out: Vec<f64> = Vec::new();
    for (d, r) in dates.iter().zip(returns) {
        let key = (d.year(), d.month());
        if months.last() != Some(&key) {
            months.push(key);
            out.push(1.0);
        }
        *out.last_mut().unwrap() *= 1.0 + r;
    }
    out.iter_mut().for_each(|g| *g -= 1.0);
    (months, out)
}

/// Annualised return, std and Sharpe. `risk_free` holds monthly rates, or is
/// empty for a zero rate.
pub fn performance_stats(monthly: &[f64], risk_free: &[f64], convention: SharpeConvention) -> Result<PerformanceStats> {
    let t = monthly.len();
    if t < MIN_MONTHS {
        return Err(Error::TooShortSeries { need: MIN_MONTHS, got: t });
    }
    if !risk_free.is_empty() && risk_free.len() != t {
        return Err(Error::DimensionMismatch { expected: t, got: risk_free.len() });
    }
    let rf = |i: usize| risk_free.get(i).copied().unwrap_or(0.0);
    let tf = t as f64;
    let growth: f64 = monthly.iter().map(|r| (1.0 + r).ln()).sum();
    let annual_return = (growth * 12.0 / tf).exp_m1();
    let mean = monthly.iter().sum::<f64>() / tf;
    let var = monthly.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (tf - 1.0);
    let annual_std = (var * 12.0).sqrt();
    let excess = match convention {
        SharpeConvention::Arithmetic => 12.0 * (0..t).map(|i| monthly[i] - rf(i)).sum::<f64>() / tf,
        SharpeConvention::Geometric => {
            let rf_growth: f64 = (0..t).map(|i| (1.0 + rf(i)).ln()).sum();
            annual_return - (rf_growth * 12.0 / tf).exp_m1()
        }
    };
    let sharpe = if annual_std > 1e-14 * excess.abs().max(1e-300) && annual_std > 0.0 {
        excess / annual_std
    } else if excess == 0.0 {
        f64::NAN
    } else {
        f64::INFINITY.copysign(excess)
    };
    Ok(PerformanceStats { annual_return, annual_std, sharpe })
}
