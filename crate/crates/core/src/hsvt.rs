//! Hard singular value thresholding (HSVT).
//!
//! A masked, zero-filled matrix is decomposed, truncated to `k` singular
//! triplets and rescaled by `1/ρ̂`, where `ρ̂` is the observed fraction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Svd;
use crate::panel::mask_fraction;

/// How many singular triplets to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPolicy {
    Fixed(usize),
    /// Smallest `k` whose leading squared singular values carry strictly more
    /// than this fraction of the total.
    #[serde(alias = "energy")]
    EnergyThreshold(f64),
    /// Keep `σ > ω(β)·median(σ)` with the Gavish–Donoho coefficient `ω`.
    #[serde(alias = "median")]
    MedianThreshold,
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy::EnergyThreshold(0.9)
    }
}

impl RankPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RankPolicy::Fixed(0) => Err(Error::InvalidArgument("fixed rank must be ≥ 1".into())),
            RankPolicy::EnergyThreshold(f) if !(f > 0.0 && f < 1.0) => Err(Error::InvalidArgument(
                format!("energy fraction {f} outside (0, 1)"),
            )),
            _ => Ok(()),
        }
    }

    /// Short stable label for reports, e.g. `fixed:3`, `energy:0.9`, `median`.
    pub fn label(&self) -> String {
        match self {
            RankPolicy::Fixed(k) => format!("fixed:{k}"),
            RankPolicy::EnergyThreshold(f) => format!("energy:{f}"),
            RankPolicy::MedianThreshold => "median".into(),
        }
    }

    /// Rank selected from a non-increasing spectrum of a `q × p` matrix.
    /// The second field reports whether a fixed rank had to be clamped to the
    /// number of singular values above `max(q, p)·ε·σ₁`.
    pub fn select(&self, singular_values: &[f64], shape: (usize, usize)) -> (usize, bool) {
        if singular_values.first().is_none_or(|&s| s <= 0.0) {
            return (0, false);
        }
        // singular values at rounding level carry no signal
        let cutoff = shape.0.max(shape.1) as f64 * f64::EPSILON * singular_values[0];
        let numeric = singular_values.iter().filter(|&&s| s > cutoff).count();
        match *self {
            RankPolicy::Fixed(k) => {
                if k > numeric {
                    log::warn!("rank {k} exceeds the numerical rank {numeric} of a {shape:?} matrix; clamping");
                    (numeric, true)
                } else {
                    (k, false)
                }
            }
            RankPolicy::EnergyThreshold(f) => (energy_rank(singular_values, f).min(numeric), false),
            RankPolicy::MedianThreshold => {
                let (q, p) = shape;
                let beta = q.min(p) as f64 / q.max(p) as f64;
                let tau = gavish_donoho_omega(beta) * median(singular_values);
                (singular_values.iter().filter(|&&s| s > tau).count().min(numeric), false)
            }
        }
    }
}

/// Quartic approximation of the optimal hard-threshold coefficient for an
/// unknown noise level, as a function of the aspect ratio `β ∈ (0, 1]`.
pub fn gavish_donoho_omega(beta: f64) -> f64 {
    0.56 * beta.powi(3) - 0.95 * beta.powi(2) + 1.82 * beta + 1.43
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Smallest `r` with `Σ_{ℓ≤r} σₗ² > energy · Σ σₗ²`; `0` for an all-zero spectrum.
pub fn energy_rank(singular_values: &[f64], energy: f64) -> usize {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return 0;
    }
    let target = energy * total;
    let mut acc = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc > target {
            return i + 1;
        }
    }
    singular_values.len()
}

/// Effective rank of a matrix at the given energy fraction.
pub fn effective_rank(m: &DMatrix<f64>, energy: f64) -> usize {
    energy_rank(&crate::linalg::singular_values(m), energy)
}

/// Truncated SVD of an observed embedding together with its `ρ̂`.
#[derive(Debug, Clone)]
pub struct HsvtModel {
    pub k: usize,
    /// Full spectrum of the input, non-increasing.
    pub singular_values: Vec<f64>,
    /// `q × k`
    pub left: DMatrix<f64>,
    /// `p × k`
    pub right: DMatrix<f64>,
    pub rho_hat: f64,
    pub source_shape: (usize, usize),
    pub policy: RankPolicy,
    /// Set when a fixed rank exceeded the numerical rank of the input.
    pub clamped: bool,
}

/// HSVT with `ρ̂` taken from the mask. Unobserved entries must already hold
/// their initialization value (normally 0).
pub fn fit_hsvt(m: &DMatrix<f64>, mask: &DMatrix<bool>, policy: RankPolicy) -> Result<HsvtModel> {
    if m.shape() != mask.shape() {
        return Err(Error::InvalidArgument("matrix and mask shapes differ".into()));
    }
    fit_hsvt_with_rho(m, mask_fraction(mask, None), policy)
}

/// HSVT with an externally supplied `ρ̂ ∈ (0, 1]`.
pub fn fit_hsvt_with_rho(m: &DMatrix<f64>, rho_hat: f64, policy: RankPolicy) -> Result<HsvtModel> {
    policy.validate()?;
    if m.is_empty() {
        return Err(Error::InvalidArgument("HSVT of an empty matrix".into()));
    }
    if !(rho_hat > 0.0 && rho_hat <= 1.0) {
        return Err(Error::InvalidArgument(format!("rho_hat {rho_hat} outside (0, 1]")));
    }
    let svd = Svd::new(m);
    let spectrum: Vec<f64> = svd.singular_values.iter().copied().collect();
    let (k, clamped) = policy.select(&spectrum, m.shape());
    Ok(HsvtModel {
        k,
        left: svd.u.columns(0, k).into_owned(),
        right: svd.v.columns(0, k).into_owned(),
        singular_values: spectrum,
        rho_hat,
        source_shape: m.shape(),
        policy,
        clamped,
    })
}

impl HsvtModel {
    /// `(1/ρ̂) Σ_{ℓ≤k} sₗ uₗ vₗᵀ`.
    pub fn estimate(&self) -> DMatrix<f64> {
        let (q, p) = self.source_shape;
        if self.k == 0 {
            return DMatrix::zeros(q, p);
        }
        let mut us = self.left.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.singular_values[j] / self.rho_hat;
        }
        us * self.right.transpose()
    }

    /// `(1/ρ̂) U_k U_kᵀ x` for each column of `x`; on the fitted columns this is
    /// exactly the matching column of [`HsvtModel::estimate`].
    pub fn project_columns(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        if self.k == 0 {
            return DMatrix::zeros(x.nrows(), x.ncols());
        }
        (&self.left * (self.left.transpose() * x)) / self.rho_hat
    }
}

/// Free-function form of [`HsvtModel::estimate`].
pub fn estimate(model: &HsvtModel) -> DMatrix<f64> {
    model.estimate()
}
