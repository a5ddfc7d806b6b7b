//! Multivariate singular spectrum analysis on stacked Page matrices.
//!
//! The crate imputes, de-noises and forecasts panels of aligned time series
//! with missing entries. Each series is folded into a non-overlapping Page
//! matrix, the per-series matrices are stacked column-wise, and the stack is
//! de-noised by hard singular value thresholding. Forecasts come from a linear
//! model fitted on the de-noised rows.
//!
//! Around that core sit
//! - [`variance`]: time-varying variance from two imputations,
//! - [`tssa`]: the Page-tensor variant with CP completion and a regime harness,
//! - [`diagnostics`]: effective-rank scaling checks for whether stacking helps,
//! - [`synth`]: signal families and factor panels with known ranks,
//! - [`experiment`]: the config-driven runner behind the `mssa-run` binary.
//!
//! See the `examples/` directory for one runnable program per capability.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod embed;
pub mod error;
pub mod experiment;
pub mod hsvt;
pub mod linalg;
pub mod metrics;
pub mod panel;
pub mod ssa;
pub mod synth;
pub mod tssa;
pub mod variance;

pub use error::{Error, Result};
pub use hsvt::{fit_hsvt, HsvtModel, RankPolicy};
pub use panel::{LatentPanel, MissingInit, Panel};
pub use ssa::{
    fit_forecaster, forecast, impute, rolling_forecast, ForecastConfig, ForecastModel, ImputeConfig, ImputeResult,
    Method,
};
