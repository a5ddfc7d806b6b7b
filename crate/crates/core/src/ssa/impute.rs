use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::over_ranges;
use crate::embed::{page_range, stacked_hankel, stacked_page_range, Orientation};
use crate::error::{Error, Result};
use crate::hsvt::{fit_hsvt_with_rho, HsvtModel, RankPolicy};
use crate::panel::{mask_fraction, MissingInit, Panel};

/// Which embedding the imputation runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// One Page matrix per series, each de-noised on its own.
    Ssa,
    /// Stacked Page matrix of all series.
    Mssa,
    /// Horizontally stacked Hankel matrices with diagonal averaging.
    Hssa,
    /// Vertically stacked Hankel matrices with diagonal averaging.
    Vssa,
    /// HSVT directly on the `N × T` observation matrix, no time embedding.
    Me,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Ssa => "ssa",
            Method::Mssa => "mssa",
            Method::Hssa => "hssa",
            Method::Vssa => "vssa",
            Method::Me => "me",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputeConfig {
    /// Window length `L`; `None` picks [`default_window`] (or `T/4` for the Hankel methods).
    pub window: Option<usize>,
    pub policy: RankPolicy,
    pub method: Method,
    pub init: MissingInit,
}

impl ImputeConfig {
    pub fn new(method: Method, policy: RankPolicy) -> Self {
        ImputeConfig {
            window: None,
            policy,
            method,
            init: MissingInit::Zero,
        }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = Some(window);
        self
    }

    pub fn with_init(mut self, init: MissingInit) -> Self {
        self.init = init;
        self
    }

    pub fn resolved_window(&self, n: usize, t: usize) -> usize {
        self.window.unwrap_or(match self.method {
            Method::Hssa | Method::Vssa => (t / 4).max(1),
            Method::Me => t.max(1),
            _ => default_window(n, t),
        })
    }
}

/// `⌊√(min(N, T)·T)⌋`, capped at `T`.
pub fn default_window(n: usize, t: usize) -> usize {
    let l = ((n.min(t) * t) as f64).sqrt().floor() as usize;
    l.clamp(1, t.max(1))
}

/// HSVT fits of one embedded time range.
#[derive(Debug, Clone)]
pub struct RangeFit {
    pub range: Range<usize>,
    /// One model per series for [`Method::Ssa`], a single model otherwise.
    pub models: Vec<HsvtModel>,
}

#[derive(Debug, Clone)]
pub struct ImputeResult {
    /// `N × T` de-noised and imputed estimates.
    pub estimates: DMatrix<f64>,
    pub window: usize,
    pub method: Method,
    pub policy: RankPolicy,
    pub fits: Vec<RangeFit>,
    pub warnings: Vec<String>,
}

/// Scale used to undo zero-filling: the observed fraction for zero fill,
/// 1 when missing cells were filled with neighbouring observations.
fn rho_for(init: MissingInit, mask: &DMatrix<bool>) -> f64 {
    match init {
        MissingInit::Zero => mask_fraction(mask, None),
        MissingInit::ForwardBackwardFill => 1.0,
    }
}

/// De-noises and imputes every cell of the panel.
pub fn impute(p: &Panel, cfg: &ImputeConfig) -> Result<ImputeResult> {
    cfg.policy.validate()?;
    let (n, t) = (p.n_series(), p.len());
    let window = cfg.resolved_window(n, t);
    if window == 0 || window > t {
        return Err(Error::Embed(format!("window length {window} invalid for series length {t}")));
    }
    let mut warnings = Vec::new();
    if p.observed_count() == 0 {
        warnings.push("panel has no observations; estimates are zero".to_string());
        log::warn!("imputing a panel with no observations");
    }
    let init = p.initialize_missing(cfg.init);
    for s in &init.zero_fallback {
        warnings.push(format!("series {s} has no observations; zero-filled"));
    }
    let data = init.panel;

    let (estimates, fits) = match cfg.method {
        Method::Mssa => {
            let (est, fits) = over_ranges(n, t, window, |start, blocks| {
                let sp = stacked_page_range(&data, window, start, blocks)?;
                let model = fit_hsvt_with_rho(&sp.data, rho_for(cfg.init, &sp.mask), cfg.policy)?;
                let grid = model.estimate();
                let mut out = DMatrix::zeros(n, blocks * window);
                for col in 0..grid.ncols() {
                    let (s, j) = sp.column_owner(col);
                    for i in 0..window {
                        out[(s, i + j * window)] = grid[(i, col)];
                    }
                }
                Ok((out, vec![model]))
            })?;
            (est, fits)
        }
        Method::Ssa => over_ranges(n, t, window, |start, blocks| {
            let mut out = DMatrix::zeros(n, blocks * window);
            let mut models = Vec::with_capacity(n);
            for s in 0..n {
                let pm = page_range(&data, s, window, start, blocks)?;
                let model = fit_hsvt_with_rho(&pm.data, rho_for(cfg.init, &pm.mask), cfg.policy)?;
                for (off, v) in model.estimate().iter().enumerate() {
                    out[(s, off)] = *v;
                }
                models.push(model);
            }
            Ok((out, models))
        })?,
        Method::Hssa | Method::Vssa => {
            let orientation = if cfg.method == Method::Hssa {
                Orientation::Horizontal
            } else {
                Orientation::Vertical
            };
            let sh = stacked_hankel(&data, orientation, Some(window))?;
            let model = fit_hsvt_with_rho(&sh.data, rho_for(cfg.init, &sh.mask), cfg.policy)?;
            let est = sh.diagonal_average(&model.estimate(), n, t);
            (est, vec![(0..t, vec![model])])
        }
        Method::Me => {
            let model = fit_hsvt_with_rho(data.values(), rho_for(cfg.init, data.mask()), cfg.policy)?;
            (model.estimate(), vec![(0..t, vec![model])])
        }
    };
    for (_, models) in &fits {
        if models.iter().any(|m| m.clamped) {
            warnings.push(format!("rank policy {} clamped to the numerical rank of the embedding", cfg.policy.label()));
            break;
        }
    }
    Ok(ImputeResult {
        estimates,
        window,
        method: cfg.method,
        policy: cfg.policy,
        fits: fits.into_iter().map(|(range, models)| RangeFit { range, models }).collect(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{corrupt, generate_latent, CorruptionSpec, FactorModelSpec, NoiseModel};

    #[test]
    fn ssa_equals_mssa_for_single_series() {
        let lp = generate_latent(&FactorModelSpec::harmonic(1, 300, 1, 2, 3)).unwrap();
        let p = corrupt(&lp, &CorruptionSpec::new(0.8, NoiseModel::Gaussian { sigma: 0.2 }, 1)).unwrap();
        let a = impute(&p, &ImputeConfig::new(Method::Ssa, RankPolicy::Fixed(4)).with_window(17)).unwrap();
        let b = impute(&p, &ImputeConfig::new(Method::Mssa, RankPolicy::Fixed(4)).with_window(17)).unwrap();
        assert_eq!(a.estimates, b.estimates);
    }

    #[test]
    fn exact_low_rank_panel_recovered() {
        let spec = FactorModelSpec::harmonic(6, 400, 2, 1, 9);
        let lp = generate_latent(&spec).unwrap();
        let p = Panel::observed(lp.values.clone());
        let res = impute(&p, &ImputeConfig::new(Method::Mssa, RankPolicy::Fixed(4))).unwrap();
        let err = (&res.estimates - &lp.values).amax();
        assert!(err < 1e-8, "max error {err}");
    }

    #[test]
    fn tail_range_gets_estimates() {
        // L = 7 does not divide T = 400: the last points come from the second range
        let lp = generate_latent(&FactorModelSpec::harmonic(3, 400, 1, 1, 4)).unwrap();
        let p = Panel::observed(lp.values.clone());
        let res = impute(&p, &ImputeConfig::new(Method::Mssa, RankPolicy::Fixed(2)).with_window(7)).unwrap();
        assert_eq!(res.fits.len(), 2);
        assert_eq!(res.fits[1].range, 400 - 399..400);
        assert!((&res.estimates - &lp.values).amax() < 1e-8);
    }

    #[test]
    fn window_longer_than_series_is_rejected() {
        let p = Panel::observed(DMatrix::from_element(2, 5, 1.0));
        let err = impute(&p, &ImputeConfig::new(Method::Mssa, RankPolicy::Fixed(1)).with_window(6));
        assert!(matches!(err, Err(Error::Embed(_))));
    }

    #[test]
    fn all_missing_panel_gives_zero_estimates() {
        let p = Panel::new(DMatrix::from_element(2, 12, 3.0), DMatrix::from_element(2, 12, false)).unwrap();
        let res = impute(&p, &ImputeConfig::new(Method::Mssa, RankPolicy::Fixed(1)).with_window(3)).unwrap();
        assert!(res.estimates.iter().all(|&v| v == 0.0));
        assert!(!res.warnings.is_empty());
    }

    #[test]
    fn hankel_baselines_recover_clean_signal() {
        let lp = generate_latent(&FactorModelSpec::harmonic(3, 120, 1, 1, 2)).unwrap();
        let p = Panel::observed(lp.values.clone());
        for m in [Method::Hssa, Method::Vssa] {
            let res = impute(&p, &ImputeConfig::new(m, RankPolicy::Fixed(2))).unwrap();
            assert_eq!(res.window, 30);
            assert!((&res.estimates - &lp.values).amax() < 1e-8);
        }
    }
}
