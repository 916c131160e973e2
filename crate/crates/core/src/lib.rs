//! Uniform sampling and volume estimation on intersections of the unit sphere
//! with a simplex, and an equal-volatility portfolio backtest built on them.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod pipeline;
pub mod rng;
pub mod simplex;
pub mod topology;
pub mod vmf;
pub mod volume;
pub mod walks;

pub use error::{Error, Result};
pub use geometry::{build_transform, PatchTransform};
pub use simplex::SimplexH;
pub use topology::{Component, ComponentGraph, PatchBody};
pub use volume::{estimate_volume, relative_volumes, AnnealingConfig, VolumeEstimate};
pub use walks::{sample_patch, ComponentSampler, PatchSample, WalkConfig, WalkCounters, WalkKind};
