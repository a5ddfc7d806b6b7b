//! Time-varying variance from two imputations: one of `X`, one of `X²`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hsvt::RankPolicy;
use crate::panel::{MissingInit, Panel};
use crate::ssa::{impute, ImputeConfig, ImputeResult, Method};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceConfig {
    pub window: Option<usize>,
    pub policy_mean: RankPolicy,
    /// The squared panel typically needs a larger rank than the mean panel.
    pub policy_squared: RankPolicy,
    pub method: Method,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        VarianceConfig {
            window: None,
            policy_mean: RankPolicy::EnergyThreshold(0.9),
            policy_squared: RankPolicy::EnergyThreshold(0.9),
            method: Method::Mssa,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VarianceResult {
    /// `max(0, ĝ − f̂²)`, element-wise.
    pub sigma2_hat: DMatrix<f64>,
    pub mean: ImputeResult,
    pub squared: ImputeResult,
    pub warnings: Vec<String>,
}

/// `σ̂² = max(0, ĝ − f̂²)` where `f̂` imputes `X` and `ĝ` imputes `X²`.
///
/// Missing cells stay missing in the squared panel. The estimate is only
/// well founded for fully observed panels; partial panels get a warning.
pub fn estimate_variance(p: &Panel, cfg: &VarianceConfig) -> Result<VarianceResult> {
    let mut warnings = Vec::new();
    if p.observed_count() < p.n_series() * p.len() {
        warnings.push(format!(
            "panel is partially observed (ρ̂ = {:.4}); variance estimate assumes full observation",
            p.observed_fraction(None)
        ));
        log::warn!("variance estimation on a partially observed panel");
    }
    let mean_cfg = ImputeConfig {
        window: cfg.window,
        policy: cfg.policy_mean,
        method: cfg.method,
        init: MissingInit::Zero,
    };
    let sq_cfg = ImputeConfig {
        policy: cfg.policy_squared,
        ..mean_cfg.clone()
    };
    let squared_panel = p.squared();
    let (mean, squared) = rayon::join(|| impute(p, &mean_cfg), || impute(&squared_panel, &sq_cfg));
    let (mean, squared) = (mean?, squared?);
    let sigma2_hat = squared
        .estimates
        .zip_map(&mean.estimates, |g, f| (g - f * f).max(0.0));
    warnings.extend(mean.warnings.iter().cloned());
    warnings.extend(squared.warnings.iter().cloned());
    Ok(VarianceResult {
        sigma2_hat,
        mean,
        squared,
        warnings,
    })
}
