//! Iso-volatility portfolio backtests.

pub mod backtest;
pub mod cluster;
pub mod covariance;
pub mod panel;
pub mod sampling;
pub mod sharpe;
pub mod stats;
pub mod synthetic;
pub mod targets;

pub use backtest::{backtest, BacktestConfig, BacktestResult, ConcatMode};
pub use panel::{load_panel, ReturnsPanel, ValueKind};
pub use sampling::{sample_level, LevelSamplerConfig};
pub use stats::SharpeConvention;
