//! Page-matrix SSA and multivariate SSA: imputation and forecasting.

mod forecast;
mod impute;

pub use forecast::{
    fit_forecaster, forecast, forecast_ahead, rolling_forecast, ForecastConfig, ForecastModel, Forecasts,
    RollingForecast, WindowForecast,
};
pub use impute::{default_window, impute, ImputeConfig, ImputeResult, Method, RangeFit};

use nalgebra::DMatrix;

use crate::embed::segment_ranges;
use crate::error::Result;

/// Estimates over the whole panel plus the per-range fit outputs.
pub(crate) type RangeEstimates<X> = (DMatrix<f64>, Vec<(std::ops::Range<usize>, X)>);

/// Runs `fit(start, blocks)` on every embedded range and averages the
/// `N × (blocks·L)` estimates where ranges overlap.
pub(crate) fn over_ranges<X>(
    n: usize,
    t: usize,
    window: usize,
    mut fit: impl FnMut(usize, usize) -> Result<(DMatrix<f64>, X)>,
) -> Result<RangeEstimates<X>> {
    let mut sum = DMatrix::zeros(n, t);
    let mut count = vec![0u32; t];
    let mut fits = Vec::new();
    for range in segment_ranges(t, window)? {
        let (est, extra) = fit(range.start, range.len() / window)?;
        for (j, time) in range.clone().enumerate() {
            for s in 0..n {
                sum[(s, time)] += est[(s, j)];
            }
            count[time] += 1;
        }
        fits.push((range, extra));
    }
    for (time, &c) in count.iter().enumerate() {
        if c > 1 {
            for s in 0..n {
                sum[(s, time)] /= c as f64;
            }
        }
    }
    Ok((sum, fits))
}
