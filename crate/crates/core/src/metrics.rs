//! Imputation / forecasting error metrics.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::ssa::Forecasts;

/// Mean squared error over every cell.
pub fn imp_err(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> f64 {
    assert_eq!(truth.shape(), estimate.shape(), "shape mismatch");
    let cells = truth.len().max(1) as f64;
    truth.iter().zip(estimate.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / cells
}

/// Mean squared error over the cells selected by `scored`.
pub fn imp_err_masked(truth: &DMatrix<f64>, estimate: &DMatrix<f64>, scored: &DMatrix<bool>) -> f64 {
    assert_eq!(truth.shape(), estimate.shape(), "shape mismatch");
    let (mut sum, mut count) = (0.0, 0usize);
    for ((a, b), &s) in truth.iter().zip(estimate.iter()).zip(scored.iter()) {
        if s {
            sum += (a - b).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// `(L / (N·T)) Σₙ Σ_{m'} (fₙ(L·m') − f̄ₙ(L·m'))²` where `T = L · #targets`.
///
/// `forecasts.times` index columns of `truth`.
pub fn for_err(truth: &DMatrix<f64>, forecasts: &Forecasts, window: usize) -> f64 {
    let n = forecasts.values.nrows();
    let span = window * forecasts.times.len();
    if n == 0 || span == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (j, &t) in forecasts.times.iter().enumerate() {
        for s in 0..n {
            sum += (truth[(s, t)] - forecasts.values[(s, j)]).powi(2);
        }
    }
    window as f64 / (n * span) as f64 * sum
}

/// Per-series location and scale used to standardize before scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Statistics of each row over `columns`, optionally restricted to `mask`.
    /// A zero or undefined scale is replaced by 1.
    pub fn fit(values: &DMatrix<f64>, columns: Range<usize>, mask: Option<&DMatrix<bool>>) -> Self {
        let n = values.nrows();
        let mut mean = vec![0.0; n];
        let mut scale = vec![1.0; n];
        for s in 0..n {
            let xs: Vec<f64> = columns
                .clone()
                .filter(|&t| mask.is_none_or(|m| m[(s, t)]))
                .map(|t| values[(s, t)])
                .collect();
            if xs.is_empty() {
                continue;
            }
            let mu = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / xs.len() as f64;
            mean[s] = mu;
            scale[s] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Standardizer { mean, scale }
    }

    pub fn apply(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(values.nrows(), values.ncols(), |s, t| {
            (values[(s, t)] - self.mean[s]) / self.scale[s]
        })
    }
}

/// RMSE of standardized values over `scored`, per series, averaged with equal
/// weight over series that have at least one scored cell.
pub fn nrmse(truth: &DMatrix<f64>, estimate: &DMatrix<f64>, scored: &DMatrix<bool>, stats: &Standardizer) -> f64 {
    assert_eq!(truth.shape(), estimate.shape(), "shape mismatch");
    let mut total = 0.0;
    let mut series = 0usize;
    for s in 0..truth.nrows() {
        let (mut sum, mut count) = (0.0, 0usize);
        for t in 0..truth.ncols() {
            if scored[(s, t)] {
                sum += ((truth[(s, t)] - estimate[(s, t)]) / stats.scale[s]).powi(2);
                count += 1;
            }
        }
        if count > 0 {
            total += (sum / count as f64).sqrt();
            series += 1;
        }
    }
    if series == 0 {
        0.0
    } else {
        total / series as f64
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}
