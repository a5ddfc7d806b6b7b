//! Synthetic signal families, spatio-temporal factor panels and corruption.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, Poisson, Uniform};
use serde::{Deserialize, Serialize};

use crate::embed::HankelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{numeric_rank, EXACT_RANK_TOL};
use crate::panel::{LatentPanel, Panel};

/// One term `a · exp(decay·t) · cos(2π·frequency·t + phase) · P(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTerm {
    pub amplitude: f64,
    /// Cycles per time step.
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub decay: f64,
    /// Polynomial coefficients in increasing degree; empty means `P ≡ 1`.
    #[serde(default)]
    pub poly: Vec<f64>,
}

impl HarmonicTerm {
    pub fn cosine(amplitude: f64, frequency: f64, phase: f64) -> Self {
        HarmonicTerm {
            amplitude,
            frequency,
            phase,
            decay: 0.0,
            poly: Vec::new(),
        }
    }

    fn degree(&self) -> usize {
        self.poly.len().saturating_sub(1)
    }

    fn eval(&self, t: f64) -> f64 {
        let p = if self.poly.is_empty() { 1.0 } else { horner(&self.poly, t) };
        self.amplitude * (self.decay * t).exp() * (2.0 * PI * self.frequency * t + self.phase).cos() * p
    }
}

/// Periodic test shapes on `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodicShape {
    /// Continuous with kinks (C⁰).
    Triangle,
    /// `x²(1−x)²`, twice continuously differentiable (C²).
    QuarticBump,
}

impl PeriodicShape {
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.rem_euclid(1.0);
        match self {
            PeriodicShape::Triangle => 1.0 - (2.0 * x - 1.0).abs(),
            PeriodicShape::QuarticBump => x * x * (1.0 - x) * (1.0 - x),
        }
    }

    /// Number of continuous derivatives over the whole period.
    pub fn smoothness(&self) -> u32 {
        match self {
            PeriodicShape::Triangle => 0,
            PeriodicShape::QuarticBump => 2,
        }
    }

    /// Cosine/sine coefficients `(a₀, [(aⱼ, bⱼ)])` up to `harmonics`, by a
    /// periodic trapezoid rule on a fine grid.
    pub fn fourier(&self, harmonics: usize) -> (f64, Vec<(f64, f64)>) {
        const GRID: usize = 1 << 14;
        let samples: Vec<f64> = (0..GRID).map(|i| self.eval(i as f64 / GRID as f64)).collect();
        let a0 = samples.iter().sum::<f64>() / GRID as f64;
        let coeffs = (1..=harmonics)
            .map(|j| {
                let (mut a, mut b) = (0.0, 0.0);
                for (i, &f) in samples.iter().enumerate() {
                    let arg = 2.0 * PI * (j * i) as f64 / GRID as f64;
                    a += f * arg.cos();
                    b += f * arg.sin();
                }
                (2.0 * a / GRID as f64, 2.0 * b / GRID as f64)
            })
            .collect();
        (a0, coeffs)
    }

    /// Sup-norm error of the `harmonics`-term Fourier truncation.
    pub fn truncation_error(&self, harmonics: usize) -> f64 {
        let (a0, coeffs) = self.fourier(harmonics);
        (0..4096)
            .map(|i| {
                let x = i as f64 / 4096.0;
                (self.eval(x) - fourier_eval(a0, &coeffs, x)).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn fourier_eval(a0: f64, coeffs: &[(f64, f64)], x: f64) -> f64 {
    a0 + coeffs
        .iter()
        .enumerate()
        .map(|(j, (a, b))| {
            let arg = 2.0 * PI * (j + 1) as f64 * x;
            a * arg.cos() + b * arg.sin()
        })
        .sum::<f64>()
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// A univariate latent signal, evaluated at `t = 1, …, T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    HarmonicMix { terms: Vec<HarmonicTerm> },
    /// `f(t) = Σ_{ℓ=1}^{G} αₗ f(t−ℓ)` started from `initial = (f(1), …, f(G))`.
    Lrf { coefficients: Vec<f64>, initial: Vec<f64> },
    SmoothPeriodic {
        period: f64,
        shape: PeriodicShape,
        /// Use the truncated Fourier series with this many harmonics.
        #[serde(default)]
        harmonics: Option<usize>,
    },
    Constant { value: f64 },
    /// Coefficients in increasing degree.
    Polynomial { coefficients: Vec<f64> },
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SignalSpec::HarmonicMix { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidArgument("harmonic mix needs at least one term".into()));
                }
                if terms.iter().any(|h| !h.frequency.is_finite() || !h.amplitude.is_finite()) {
                    return Err(Error::InvalidArgument("harmonic parameters must be finite".into()));
                }
            }
            SignalSpec::Lrf { coefficients, initial } => {
                if coefficients.is_empty() || coefficients.len() != initial.len() {
                    return Err(Error::InvalidArgument(
                        "LRF needs G ≥ 1 coefficients and G initial values".into(),
                    ));
                }
            }
            SignalSpec::SmoothPeriodic { period, .. } if !(*period > 0.0) => {
                return Err(Error::InvalidArgument("period must be positive".into()));
            }
            SignalSpec::Polynomial { coefficients } if coefficients.is_empty() => {
                return Err(Error::InvalidArgument("polynomial needs coefficients".into()));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn sample(&self, len: usize) -> Vec<f64> {
        let ts = (1..=len).map(|t| t as f64);
        match self {
            SignalSpec::HarmonicMix { terms } => ts.map(|t| terms.iter().map(|h| h.eval(t)).sum()).collect(),
            SignalSpec::Lrf { coefficients, initial } => {
                let mut out: Vec<f64> = initial.iter().copied().take(len).collect();
                while out.len() < len {
                    let t = out.len();
                    let v = coefficients.iter().enumerate().map(|(l, a)| a * out[t - 1 - l]).sum();
                    out.push(v);
                }
                out
            }
            SignalSpec::SmoothPeriodic {
                period,
                shape,
                harmonics,
            } => match harmonics {
                None => ts.map(|t| shape.eval(t / period)).collect(),
                Some(g) => {
                    let (a0, coeffs) = shape.fourier(*g);
                    ts.map(|t| fourier_eval(a0, &coeffs, t / period)).collect()
                }
            },
            SignalSpec::Constant { value } => vec![*value; len],
            SignalSpec::Polynomial { coefficients } => ts.map(|t| horner(coefficients, t)).collect(),
        }
    }

    /// Upper bound on the Hankel rank: `A(m_max+1)(m_max+2)` for harmonic mixes,
    /// `G` for recurrences, `2h+1` for an `h`-harmonic periodic truncation.
    /// `None` for an untruncated periodic shape, which is only approximately low rank.
    pub fn hankel_rank_bound(&self) -> Option<usize> {
        match self {
            SignalSpec::HarmonicMix { terms } => {
                let m = terms.iter().map(HarmonicTerm::degree).max().unwrap_or(0);
                Some(terms.len() * (m + 1) * (m + 2))
            }
            SignalSpec::Lrf { coefficients, .. } => Some(coefficients.len()),
            SignalSpec::SmoothPeriodic { harmonics, .. } => harmonics.map(|g| 2 * g + 1),
            SignalSpec::Constant { .. } => Some(1),
            SignalSpec::Polynomial { coefficients } => Some(coefficients.len()),
        }
    }
}

/// Numeric rank (relative tolerance 1e−8) of the `⌊T/2⌋ × ⌊T/2⌋` Hankel matrix of the signal.
pub fn hankel_rank_oracle(spec: &SignalSpec, len: usize) -> Result<usize> {
    spec.validate()?;
    hankel_rank_of(&spec.sample(len))
}

fn hankel_rank_of(x: &[f64]) -> Result<usize> {
    Ok(numeric_rank(&HankelMatrix::square(x)?.data, EXACT_RANK_TOL))
}

/// Hankel ranks of two signals, their sum and their point-wise product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CalculusCheck {
    pub rank_f1: usize,
    pub rank_f2: usize,
    pub rank_sum: usize,
    pub rank_prod: usize,
    /// `G₁ + G₂`
    pub bound_sum: usize,
    /// `G₁ · G₂`
    pub bound_prod: usize,
}

impl CalculusCheck {
    pub fn holds(&self) -> bool {
        self.rank_sum <= self.bound_sum && self.rank_prod <= self.bound_prod
    }
}

pub fn calculus_check(f1: &SignalSpec, f2: &SignalSpec, len: usize) -> Result<CalculusCheck> {
    f1.validate()?;
    f2.validate()?;
    let (x1, x2) = (f1.sample(len), f2.sample(len));
    let sum: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
    let prod: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a * b).collect();
    let (g1, g2) = (hankel_rank_of(&x1)?, hankel_rank_of(&x2)?);
    Ok(CalculusCheck {
        rank_f1: g1,
        rank_f2: g2,
        rank_sum: hankel_rank_of(&sum)?,
        rank_prod: hankel_rank_of(&prod)?,
        bound_sum: g1 + g2,
        bound_prod: g1 * g2,
    })
}

/// `M = U·W` with `N × R` loadings and `R` temporal factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorModelSpec {
    pub n: usize,
    pub t: usize,
    /// One signal per latent factor; `R = temporal.len()`.
    pub temporal: Vec<SignalSpec>,
    /// Loadings are drawn standard normal and clipped to `±loading_bound`.
    #[serde(default = "default_loading_bound")]
    pub loading_bound: f64,
    /// Optional bound on `|W|`; generation fails when a factor exceeds it.
    #[serde(default)]
    pub value_bound: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_loading_bound() -> f64 {
    3.0
}

impl FactorModelSpec {
    /// `r` factors, each a sum of `harmonics` cosines with seeded random
    /// frequencies in `[1/200, 1/20]` cycles per step, so `G = 2·harmonics`.
    pub fn harmonic(n: usize, t: usize, r: usize, harmonics: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d);
        let freq = Uniform::new(1.0 / 200.0, 1.0 / 20.0).expect("valid range");
        let amp = Uniform::new(0.5, 1.5).expect("valid range");
        let phase = Uniform::new(0.0, 2.0 * PI).expect("valid range");
        let temporal = (0..r)
            .map(|_| SignalSpec::HarmonicMix {
                terms: (0..harmonics)
                    .map(|_| HarmonicTerm::cosine(amp.sample(&mut rng), freq.sample(&mut rng), phase.sample(&mut rng)))
                    .collect(),
            })
            .collect();
        FactorModelSpec {
            n,
            t,
            temporal,
            loading_bound: 3.0,
            value_bound: None,
            seed,
        }
    }

    pub fn rank(&self) -> usize {
        self.temporal.len()
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.t == 0 || self.temporal.is_empty() {
            return Err(Error::InvalidArgument("factor model needs N, T, R ≥ 1".into()));
        }
        if !(self.loading_bound > 0.0) {
            return Err(Error::InvalidArgument("loading bound must be positive".into()));
        }
        self.temporal.iter().try_for_each(SignalSpec::validate)
    }

    /// `(U, W)` with `U: N × R`, `W: R × T`.
    pub fn factors(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let bound = self.loading_bound;
        let u = DMatrix::from_fn(self.n, self.rank(), |_, _| Distribution::<f64>::sample(&normal, &mut rng).clamp(-bound, bound));
        let mut w = DMatrix::zeros(self.rank(), self.t);
        for (r, spec) in self.temporal.iter().enumerate() {
            for (t, v) in spec.sample(self.t).into_iter().enumerate() {
                w[(r, t)] = v;
            }
        }
        if let Some(b) = self.value_bound {
            if let Some(v) = w.iter().find(|v| v.abs() > b) {
                return Err(Error::InvalidArgument(format!("temporal factor value {v} exceeds bound {b}")));
            }
        }
        Ok((u, w))
    }
}

/// Latent panel `M = U W` of a factor model.
pub fn generate_latent(spec: &FactorModelSpec) -> Result<LatentPanel> {
    let (u, w) = spec.factors()?;
    Ok(LatentPanel::new(u * w))
}

/// Tensor-structured harmonic mixture panel: `X_{i,j}(t) = Σ_k u_{ik} v_{jk} g_k(t)`
/// with `g_k(t) = Σ_{h=1}^{4} α_h cos(ω_h t / T)`, `α ~ U[−1, 10]`, `ω ~ U[1, 1000]`.
/// Series `i·m + j` of the result is `X_{i,j}`.
pub fn harmonic_mixture_panel(n: usize, m: usize, r: usize, t: usize, seed: u64) -> Result<LatentPanel> {
    if n == 0 || m == 0 || r == 0 || t == 0 {
        return Err(Error::InvalidArgument("all dimensions must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let u = DMatrix::from_fn(n, r, |_, _| normal.sample(&mut rng));
    let v = DMatrix::from_fn(m, r, |_, _| normal.sample(&mut rng));
    let alpha = Uniform::new(-1.0, 10.0).expect("valid range");
    let omega = Uniform::new(1.0, 1000.0).expect("valid range");
    let g: Vec<Vec<f64>> = (0..r)
        .map(|_| {
            let terms = (0..4)
                .map(|_| {
                    let (a, w) = (alpha.sample(&mut rng), omega.sample(&mut rng));
                    HarmonicTerm::cosine(a, w / (2.0 * PI * t as f64), 0.0)
                })
                .collect();
            SignalSpec::HarmonicMix { terms }.sample(t)
        })
        .collect();
    let values = DMatrix::from_fn(n * m, t, |row, col| {
        let (i, j) = (row / m, row % m);
        (0..r).map(|k| u[(i, k)] * v[(j, k)] * g[k][col]).sum()
    });
    Ok(LatentPanel::new(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    None,
    /// Zero-mean Gaussian with standard deviation `sigma`, or with the
    /// per-cell variance field when one is available.
    Gaussian { sigma: f64 },
    /// Observations drawn as `Poisson(max(f, 0))`.
    PoissonMean,
}

/// Observation model: independent masking with probability `rho` plus noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSpec {
    pub rho: f64,
    #[serde(default)]
    pub noise: NoiseModel,
    /// Factor model for the time-varying variance `σₙ²(t)`; its absolute value is used.
    #[serde(default)]
    pub variance: Option<FactorModelSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(rho: f64, noise: NoiseModel, seed: u64) -> Self {
        CorruptionSpec {
            rho,
            noise,
            variance: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidArgument(format!("rho {} outside (0, 1]", self.rho)));
        }
        if let NoiseModel::Gaussian { sigma } = self.noise {
            if !(sigma >= 0.0) {
                return Err(Error::InvalidArgument(format!("sigma {sigma} must be ≥ 0")));
            }
        }
        Ok(())
    }

    /// Variance field produced by `variance`, if configured.
    pub fn variance_field(&self) -> Result<Option<DMatrix<f64>>> {
        match &self.variance {
            None => Ok(None),
            Some(spec) => Ok(Some(generate_latent(spec)?.values.map(f64::abs))),
        }
    }

    /// The latent panel with the variance field attached (when configured).
    pub fn latent_with_variance(&self, lp: &LatentPanel) -> Result<LatentPanel> {
        match self.variance_field()? {
            Some(var) => LatentPanel::with_variances(lp.values.clone(), var),
            None => Ok(lp.clone()),
        }
    }
}

/// Draws a noisy, partially observed panel from a latent panel.
pub fn corrupt(lp: &LatentPanel, c: &CorruptionSpec) -> Result<Panel> {
    c.validate()?;
    let (n, t) = lp.values.shape();
    let field = match c.variance_field()? {
        Some(v) => {
            if v.shape() != (n, t) {
                return Err(Error::InvalidArgument("variance model shape differs from latent panel".into()));
            }
            Some(v)
        }
        None => lp.variances.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let keep = Bernoulli::new(c.rho).expect("rho validated");
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut values = DMatrix::zeros(n, t);
    let mut mask = DMatrix::from_element(n, t, false);
    for s in 0..n {
        for step in 0..t {
            let f = lp.values[(s, step)];
            let x = match c.noise {
                NoiseModel::None => f,
                NoiseModel::Gaussian { sigma } => {
                    let sd = field.as_ref().map_or(sigma, |v| v[(s, step)].sqrt());
                    f + sd * normal.sample(&mut rng)
                }
                NoiseModel::PoissonMean => {
                    let lambda = f.max(0.0);
                    if lambda > 0.0 {
                        Poisson::new(lambda).expect("positive rate").sample(&mut rng)
                    } else {
                        0.0
                    }
                }
            };
            let observed = keep.sample(&mut rng);
            values[(s, step)] = x;
            mask[(s, step)] = observed;
        }
    }
    Panel::new(values, mask)
}

/// Independent uniform draw helper shared by protocol code.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let _: u64 = rng.random();
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(freq: f64) -> SignalSpec {
        SignalSpec::HarmonicMix {
            terms: vec![HarmonicTerm::cosine(1.0, freq, 0.3)],
        }
    }

    #[test]
    fn constant_factor_gives_proportional_series() {
        let spec = FactorModelSpec {
            n: 4,
            t: 10,
            temporal: vec![SignalSpec::Constant { value: 2.0 }],
            loading_bound: 3.0,
            value_bound: None,
            seed: 7,
        };
        let (u, _) = spec.factors().unwrap();
        let lp = generate_latent(&spec).unwrap();
        for n in 0..4 {
            for t in 0..10 {
                assert!((lp.values[(n, t)] - 2.0 * u[(n, 0)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn latent_rank_at_most_r() {
        let spec = FactorModelSpec::harmonic(12, 200, 3, 2, 1);
        let lp = generate_latent(&spec).unwrap();
        assert!(numeric_rank(&lp.values, EXACT_RANK_TOL) <= 3);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = FactorModelSpec::harmonic(5, 50, 2, 1, 42);
        assert_eq!(generate_latent(&spec).unwrap(), generate_latent(&spec).unwrap());
        let c = CorruptionSpec::new(0.7, NoiseModel::Gaussian { sigma: 0.3 }, 9);
        let lp = generate_latent(&spec).unwrap();
        assert_eq!(corrupt(&lp, &c).unwrap(), corrupt(&lp, &c).unwrap());
    }

    #[test]
    fn value_bound_enforced() {
        let mut spec = FactorModelSpec::harmonic(2, 50, 1, 1, 0);
        spec.value_bound = Some(0.01);
        assert!(generate_latent(&spec).is_err());
    }

    #[test]
    fn harmonic_mixture_panel_shape() {
        let lp = harmonic_mixture_panel(5, 10, 4, 15_000, 0).unwrap();
        assert_eq!(lp.values.shape(), (50, 15_000));
    }

    #[test]
    fn clean_corruption_is_identity() {
        let lp = generate_latent(&FactorModelSpec::harmonic(3, 40, 1, 1, 3)).unwrap();
        let p = corrupt(&lp, &CorruptionSpec::new(1.0, NoiseModel::None, 0)).unwrap();
        assert_eq!(p.values(), &lp.values);
        assert_eq!(p.observed_fraction(None), 1.0);
    }

    #[test]
    fn mask_density_concentrates() {
        let lp = LatentPanel::new(DMatrix::zeros(10, 2000));
        let p = corrupt(&lp, &CorruptionSpec::new(0.5, NoiseModel::None, 11)).unwrap();
        assert!((p.observed_fraction(None) - 0.5).abs() < 0.02);
    }

    #[test]
    fn gaussian_noise_has_requested_scale() {
        let lp = LatentPanel::new(DMatrix::from_element(20, 10_000, 1.0));
        let p = corrupt(&lp, &CorruptionSpec::new(0.8, NoiseModel::Gaussian { sigma: 0.1 }, 5)).unwrap();
        let resid: Vec<f64> = p
            .values()
            .iter()
            .zip(p.mask().iter())
            .filter(|(_, &m)| m)
            .map(|(v, _)| v - 1.0)
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let sd = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64).sqrt();
        assert!((sd - 0.1).abs() < 0.005, "sd {sd}");
    }

    #[test]
    fn rank_oracle_examples() {
        assert_eq!(hankel_rank_oracle(&harmonic(0.07), 100).unwrap(), 2);
        assert!(harmonic(0.07).hankel_rank_bound().unwrap() >= 2);
        let quad = SignalSpec::Polynomial {
            coefficients: vec![1.0, -0.5, 0.02],
        };
        assert_eq!(hankel_rank_oracle(&quad, 60).unwrap(), 3);
        assert_eq!(hankel_rank_oracle(&SignalSpec::Constant { value: 4.0 }, 30).unwrap(), 1);
    }

    #[test]
    fn calculus_examples() {
        let sum = calculus_check(&harmonic(0.05), &harmonic(0.11), 120).unwrap();
        assert_eq!(sum.rank_sum, 4);
        assert!(sum.holds());
        let one = SignalSpec::Constant { value: 1.0 };
        let id = calculus_check(&harmonic(0.05), &one, 120).unwrap();
        assert_eq!(id.rank_prod, id.rank_f1);
    }

    #[test]
    fn lrf_satisfies_recurrence() {
        let spec = SignalSpec::Lrf {
            coefficients: vec![1.6, -0.9, 0.2],
            initial: vec![1.0, 0.5, -0.3],
        };
        let x = spec.sample(80);
        for t in 3..80 {
            let pred = 1.6 * x[t - 1] - 0.9 * x[t - 2] + 0.2 * x[t - 3];
            assert!((x[t] - pred).abs() <= 1e-10 * (1.0 + x[t].abs()));
        }
    }

    #[test]
    fn fourier_truncation_of_smooth_shape_decays_fast() {
        let shape = PeriodicShape::QuarticBump;
        let gs = [2usize, 4, 8, 16];
        let errs: Vec<f64> = gs.iter().map(|&g| shape.truncation_error(g)).collect();
        let slope = crate::metrics::loglog_slope(&gs.iter().map(|&g| g as f64).collect::<Vec<_>>(), &errs);
        let k = shape.smoothness() as f64;
        assert!(slope <= -(k - 0.5) + 0.3, "slope {slope}");
    }
}
