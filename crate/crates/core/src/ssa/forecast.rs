use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::impute::default_window;
use crate::embed::stacked_page_range;
use crate::error::{Error, Result};
use crate::hsvt::{fit_hsvt_with_rho, HsvtModel, RankPolicy};
use crate::linalg::lstsq_min_norm;
use crate::metrics::{nrmse, Standardizer};
use crate::panel::{mask_fraction, MissingInit, Panel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    /// `None` picks `⌊√(min(N, T)·T)⌋`, reduced to `T/2` when needed.
    pub window: Option<usize>,
    pub policy: RankPolicy,
    pub init: MissingInit,
}

impl ForecastConfig {
    pub fn new(policy: RankPolicy) -> Self {
        ForecastConfig {
            window: None,
            policy,
            init: MissingInit::Zero,
        }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = Some(window);
        self
    }

    pub fn resolved_window(&self, n: usize, t: usize) -> usize {
        self.window.unwrap_or_else(|| default_window(n, t).min(t / 2).max(2))
    }
}

/// Forecast values at a set of time indices (columns of the source panel).
#[derive(Debug, Clone, PartialEq)]
pub struct Forecasts {
    pub times: Vec<usize>,
    /// `N × times.len()`
    pub values: DMatrix<f64>,
}

/// Linear model predicting the last entry of a Page column from the de-noised
/// first `L − 1` entries.
#[derive(Debug, Clone)]
pub struct ForecastModel {
    /// Length `L − 1`.
    pub beta: DVector<f64>,
    pub window: usize,
    pub k: usize,
    /// Observed fraction of the first `L − 1` Page rows.
    pub rho_hat: f64,
    /// HSVT of the first `L − 1` rows.
    pub regressor: HsvtModel,
    /// First time index of the fitted range; targets sit at `origin + m·L − 1`.
    pub origin: usize,
    pub blocks: usize,
    pub init: MissingInit,
    /// `‖y − X̂ᵀβ̂‖₂` on the training columns.
    pub residual_norm: f64,
    /// In-sample forecasts at the training targets.
    pub fitted: Forecasts,
}

/// HSVT of the regressor rows of a stacked Page matrix.
///
/// Row `L` is zeroed before anything else touches the matrix, so the
/// regressor never depends on the target row.
pub(crate) fn regressor_hsvt(
    data: &DMatrix<f64>,
    mask: &DMatrix<bool>,
    policy: RankPolicy,
    init: MissingInit,
) -> Result<HsvtModel> {
    let l = data.nrows();
    let mut zeroed = data.clone();
    zeroed.row_mut(l - 1).fill(0.0);
    let rows = zeroed.rows(0, l - 1).into_owned();
    let rho = match init {
        MissingInit::Zero => mask_fraction(mask, Some(0..l - 1)),
        MissingInit::ForwardBackwardFill => 1.0,
    };
    fit_hsvt_with_rho(&rows, rho, policy)
}

/// Learns `β̂` on the stacked Page matrix of the last `⌊T/L⌋·L` points.
pub fn fit_forecaster(p: &Panel, cfg: &ForecastConfig) -> Result<ForecastModel> {
    cfg.policy.validate()?;
    let (n, t) = (p.n_series(), p.len());
    let window = cfg.resolved_window(n, t);
    if window < 2 {
        return Err(Error::InvalidArgument("forecasting needs a window length ≥ 2".into()));
    }
    if t < 2 * window {
        return Err(Error::Embed(format!("forecasting needs T ≥ 2L (T = {t}, L = {window})")));
    }
    let blocks = t / window;
    let origin = t - blocks * window;

    let filled = p.initialize_missing(cfg.init).panel;
    let sp = stacked_page_range(&filled, window, origin, blocks)?;
    let regressor = regressor_hsvt(&sp.data, &sp.mask, cfg.policy, cfg.init)?;
    let design = regressor.estimate();
    if design.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroDesign);
    }

    // targets always use zero fill, scaled by the regressor-row observed fraction
    let rho_y = mask_fraction(&sp.mask, Some(0..window - 1));
    let raw = stacked_page_range(&p.initialize_missing(MissingInit::Zero).panel, window, origin, blocks)?;
    let y: DVector<f64> = raw.data.row(window - 1).transpose() / rho_y;

    let xt = design.transpose();
    let beta = lstsq_min_norm(&xt, &y);
    let pred = &xt * &beta;
    let residual_norm = (&y - &pred).norm();

    let fitted = Forecasts {
        times: (0..blocks).map(|j| origin + (j + 1) * window - 1).collect(),
        values: DMatrix::from_fn(n, blocks, |s, j| pred[s * blocks + j]),
    };
    Ok(ForecastModel {
        beta,
        window,
        k: regressor.k,
        rho_hat: rho_y,
        regressor,
        origin,
        blocks,
        init: cfg.init,
        residual_norm,
        fitted,
    })
}

impl ForecastModel {
    fn is_aligned(&self, time: usize) -> bool {
        time + 1 >= self.origin + self.window && (time + 1 - self.origin).is_multiple_of(self.window)
    }

    /// `U Uᵀ β̂`: weights applied directly to a fully known window.
    fn effective_weights(&self) -> DVector<f64> {
        &self.regressor.left * (self.regressor.left.transpose() * &self.beta)
    }

    /// Prediction from a window of `L − 1` values where only `known` entries are
    /// trusted: the window is fitted by least squares in the span of the
    /// regressor's left singular vectors.
    fn predict_window(&self, window: &[f64], known: &[bool], weights: &DVector<f64>) -> f64 {
        if known.iter().all(|&k| k) {
            return weights.iter().zip(window).map(|(w, x)| w * x).sum();
        }
        let k = self.regressor.k;
        let idx: Vec<usize> = (0..window.len()).filter(|&i| known[i]).collect();
        if idx.is_empty() || k == 0 {
            return 0.0;
        }
        let sub = DMatrix::from_fn(idx.len(), k, |r, c| self.regressor.left[(idx[r], c)]);
        let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| window[i]));
        let coef = lstsq_min_norm(&sub, &rhs);
        let xhat = &self.regressor.left * coef;
        self.beta.dot(&xhat)
    }
}

/// Forecasts `β̂ᵀ x̂` at times aligned with the model's Page grid.
///
/// `x̂` is the HSVT projection of the `L − 1` preceding values, read from `p`
/// (zero-filled or forward filled as during training). On training columns
/// this reproduces [`ForecastModel::fitted`].
pub fn forecast(model: &ForecastModel, p: &Panel, times: &[usize]) -> Result<Forecasts> {
    let l = model.window;
    let filled = p.initialize_missing(model.init).panel;
    let mut values = DMatrix::zeros(p.n_series(), times.len());
    for (j, &time) in times.iter().enumerate() {
        if !model.is_aligned(time) {
            return Err(Error::Misaligned {
                time,
                window: l,
                origin: model.origin,
            });
        }
        let first = time + 1 - l;
        if time > p.len() {
            return Err(Error::InvalidArgument(format!(
                "target {time} needs observations up to {} but the panel has {}",
                time - 1,
                p.len()
            )));
        }
        let x = DMatrix::from_fn(l - 1, p.n_series(), |i, s| filled.values()[(s, first + i)]);
        let xhat = model.regressor.project_columns(&x);
        for s in 0..p.n_series() {
            values[(s, j)] = model.beta.dot(&xhat.column(s));
        }
    }
    Ok(Forecasts {
        times: times.to_vec(),
        values,
    })
}

/// Recursive one-step-ahead forecasts for the `horizon` steps after `history`.
///
/// Not restricted to the Page grid: each step slides the `L − 1` window,
/// de-noises it with the learned subspace and feeds earlier predictions back
/// in. Returns an `N × horizon` grid.
pub fn forecast_ahead(model: &ForecastModel, history: &Panel, horizon: usize) -> Result<DMatrix<f64>> {
    let w = model.window - 1;
    if history.len() < w {
        return Err(Error::InvalidArgument(format!(
            "history of length {} shorter than the regressor window {w}",
            history.len()
        )));
    }
    let weights = model.effective_weights();
    let mut out = DMatrix::zeros(history.n_series(), horizon);
    for s in 0..history.n_series() {
        let start = history.len() - w;
        let mut vals: Vec<f64> = (start..history.len()).map(|t| history.values()[(s, t)]).collect();
        let mut known: Vec<bool> = (start..history.len()).map(|t| history.is_observed(s, t)).collect();
        for h in 0..horizon {
            let tail = vals.len() - w;
            let pred = model.predict_window(&vals[tail..], &known[tail..], &weights);
            out[(s, h)] = pred;
            vals.push(pred);
            known.push(true);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct WindowForecast {
    /// Training uses times `0..train_end` only.
    pub train_end: usize,
    pub targets: Range<usize>,
    /// `N × horizon`
    pub predictions: DMatrix<f64>,
}

/// Expanding-window evaluation over the last `windows · horizon` steps.
#[derive(Debug, Clone)]
pub struct RollingForecast {
    pub horizon: usize,
    pub windows: Vec<WindowForecast>,
}

/// Refits on `0..train_end` for each window and forecasts the next `horizon` steps.
pub fn rolling_forecast(p: &Panel, cfg: &ForecastConfig, horizon: usize, windows: usize) -> Result<RollingForecast> {
    if horizon == 0 || windows == 0 {
        return Err(Error::InvalidArgument("horizon and window count must be ≥ 1".into()));
    }
    let t = p.len();
    let eval = horizon * windows;
    if eval >= t {
        return Err(Error::InvalidArgument(format!(
            "{windows} windows of {horizon} steps leave no training data (T = {t})"
        )));
    }
    let mut out = Vec::with_capacity(windows);
    for w in 0..windows {
        let train_end = t - eval + w * horizon;
        let history = p.slice_time(0..train_end)?;
        let model = fit_forecaster(&history, cfg)?;
        let predictions = forecast_ahead(&model, &history, horizon)?;
        out.push(WindowForecast {
            train_end,
            targets: train_end..train_end + horizon,
            predictions,
        });
    }
    Ok(RollingForecast { horizon, windows: out })
}

impl RollingForecast {
    /// First forecast time.
    pub fn eval_start(&self) -> usize {
        self.windows.first().map_or(0, |w| w.train_end)
    }

    /// All predictions laid out over the evaluation period: `N × (windows·horizon)`.
    pub fn predictions(&self) -> DMatrix<f64> {
        let n = self.windows.first().map_or(0, |w| w.predictions.nrows());
        let mut out = DMatrix::zeros(n, self.windows.len() * self.horizon);
        for (i, w) in self.windows.iter().enumerate() {
            out.columns_mut(i * self.horizon, self.horizon).copy_from(&w.predictions);
        }
        out
    }

    /// Mean squared error of each window against `truth` (an `N × T` grid).
    pub fn for_err_series(&self, truth: &DMatrix<f64>) -> Vec<f64> {
        self.windows
            .iter()
            .map(|w| {
                let n = w.predictions.nrows();
                let mut sum = 0.0;
                for (j, t) in w.targets.clone().enumerate() {
                    for s in 0..n {
                        sum += (truth[(s, t)] - w.predictions[(s, j)]).powi(2);
                    }
                }
                sum / (n * self.horizon) as f64
            })
            .collect()
    }

    /// NRMSE over the evaluation period, standardized with statistics of `truth`
    /// on the first training period.
    pub fn nrmse(&self, truth: &DMatrix<f64>) -> f64 {
        let start = self.eval_start();
        let stats = Standardizer::fit(truth, 0..start, None);
        let pred = self.predictions();
        let span = pred.ncols();
        let truth_eval = truth.columns(start, span).into_owned();
        let scored = DMatrix::from_element(pred.nrows(), span, true);
        nrmse(&truth_eval, &pred, &scored, &stats)
    }
}
