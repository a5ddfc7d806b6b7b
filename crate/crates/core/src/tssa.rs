//! Tensor SSA: imputation on the order-three Page tensor via masked CP
//! alternating least squares, and a harness comparing mSSA, tSSA and plain
//! matrix estimation on the same synthetic panels.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{page_tensor_range, PageTensor};
use crate::error::{Error, Result};
use crate::hsvt::RankPolicy;
use crate::linalg::lstsq_min_norm;
use crate::metrics::imp_err;
use crate::panel::Panel;
use crate::ssa::{impute, over_ranges, ImputeConfig, ImputeResult, Method};
use crate::synth::{corrupt, generate_latent, CorruptionSpec, FactorModelSpec, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlsOptions {
    pub max_iters: usize,
    /// Stop once the relative change of the objective between sweeps drops below this.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for AlsOptions {
    fn default() -> Self {
        AlsOptions {
            max_iters: 500,
            tol: 1e-9,
            restarts: 5,
            seed: 0,
        }
    }
}

/// Rank-`r` CP factors of an `n₀ × n₁ × n₂` tensor.
#[derive(Debug, Clone)]
pub struct CpModel {
    pub rank: usize,
    /// `n₀ × r` (series).
    pub a: DMatrix<f64>,
    /// `n₁ × r` (blocks).
    pub b: DMatrix<f64>,
    /// `n₂ × r` (lags).
    pub c: DMatrix<f64>,
    /// `‖X − X̂‖ / ‖X‖` over observed entries.
    pub fit_residual: f64,
    pub converged: bool,
    /// Sum of squared residuals on observed entries after each sweep.
    pub objective_trace: Vec<f64>,
    /// Index of the restart that produced this model.
    pub restart: usize,
}

impl CpModel {
    pub fn dims(&self) -> [usize; 3] {
        [self.a.nrows(), self.b.nrows(), self.c.nrows()]
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        (0..self.rank).map(|q| self.a[(i, q)] * self.b[(j, q)] * self.c[(k, q)]).sum()
    }

    /// Dense reconstruction in the same `(a, b, c)` row-major layout as [`PageTensor`].
    pub fn reconstruct(&self) -> Vec<f64> {
        let [n0, n1, n2] = self.dims();
        let mut out = Vec::with_capacity(n0 * n1 * n2);
        for i in 0..n0 {
            for j in 0..n1 {
                for k in 0..n2 {
                    out.push(self.value(i, j, k));
                }
            }
        }
        out
    }
}

/// Masked CP-ALS with `opts.restarts` random orthonormal starts; the restart with
/// the smallest final objective wins (ties go to the lowest index).
pub fn te3_fit(t: &PageTensor, rank: usize, opts: &AlsOptions) -> Result<CpModel> {
    if rank == 0 {
        return Err(Error::InvalidArgument("CP rank must be ≥ 1".into()));
    }
    if t.data.is_empty() {
        return Err(Error::InvalidArgument("cannot fit an empty tensor".into()));
    }
    if opts.restarts == 0 || opts.max_iters == 0 || !(opts.tol >= 0.0) {
        return Err(Error::InvalidArgument("ALS needs restarts ≥ 1, max_iters ≥ 1 and tol ≥ 0".into()));
    }
    let models: Vec<CpModel> = (0..opts.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(restart as u64);
            als_run(t, rank, opts, &mut rng, restart)
        })
        .collect();
    let best = models
        .into_iter()
        .reduce(|best, m| {
            if m.objective_trace.last() < best.objective_trace.last() {
                m
            } else {
                best
            }
        })
        .expect("at least one restart");
    if !best.converged {
        log::warn!("CP-ALS did not converge within {} sweeps", opts.max_iters);
    }
    Ok(best)
}

fn als_run(t: &PageTensor, rank: usize, opts: &AlsOptions, rng: &mut ChaCha8Rng, restart: usize) -> CpModel {
    let [n0, n1, n2] = t.dims;
    let norm2: f64 = t.data.iter().zip(&t.mask).filter(|(_, &m)| m).map(|(v, _)| v * v).sum();
    let mut a = DMatrix::zeros(n0, rank);
    let mut b = random_orthonormal(n1, rank, rng);
    let mut c = random_orthonormal(n2, rank, rng);

    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iters {
        a = update_mode(t, 0, &b, &c);
        b = update_mode(t, 1, &a, &c);
        c = update_mode(t, 2, &a, &b);
        normalize_columns(&mut a, &mut b, &mut c);
        let sse = objective(t, &a, &b, &c);
        let prev = trace.last().copied();
        trace.push(sse);
        if sse <= 1e-28 * norm2.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        if let Some(prev) = prev {
            if (prev - sse).abs() <= opts.tol * prev.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
    }
    let sse = *trace.last().expect("max_iters ≥ 1");
    CpModel {
        rank,
        a,
        b,
        c,
        fit_residual: if norm2 > 0.0 { (sse / norm2).sqrt() } else { sse.sqrt() },
        converged,
        objective_trace: trace,
        restart,
    }
}

fn random_orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    if rows >= cols {
        g.qr().q()
    } else {
        g
    }
}

/// Moves column norms of `b` and `c` into `a`; the tensor is unchanged.
fn normalize_columns(a: &mut DMatrix<f64>, b: &mut DMatrix<f64>, c: &mut DMatrix<f64>) {
    for q in 0..a.ncols() {
        let (nb, nc) = (b.column(q).norm(), c.column(q).norm());
        if nb > 0.0 && nc > 0.0 {
            b.column_mut(q).unscale_mut(nb);
            c.column_mut(q).unscale_mut(nc);
            a.column_mut(q).scale_mut(nb * nc);
        }
    }
}

/// Exact least-squares update of one factor given the other two, row by row
/// over the observed entries.
fn update_mode(t: &PageTensor, mode: usize, f: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    let [n0, n1, n2] = t.dims;
    let r = f.ncols();
    let rows = t.dims[mode];
    let (fr, gr) = (row_major(f), row_major(g));
    // lower triangles of the per-row Gram matrices, and the right-hand sides
    let mut grams = vec![0.0; rows * r * r];
    let mut rhs = vec![0.0; rows * r];
    let mut z = vec![0.0; r];
    for i in 0..n0 {
        for j in 0..n1 {
            for k in 0..n2 {
                let off = (i * n1 + j) * n2 + k;
                if !t.mask[off] {
                    continue;
                }
                let (row, p, q) = match mode {
                    0 => (i, j, k),
                    1 => (j, i, k),
                    _ => (k, i, j),
                };
                let (fp, gq) = (&fr[p * r..(p + 1) * r], &gr[q * r..(q + 1) * r]);
                for s in 0..r {
                    z[s] = fp[s] * gq[s];
                }
                let x = t.data[off];
                let gm = &mut grams[row * r * r..(row + 1) * r * r];
                let y = &mut rhs[row * r..(row + 1) * r];
                for a in 0..r {
                    let za = z[a];
                    for b in 0..=a {
                        gm[a * r + b] += za * z[b];
                    }
                    y[a] += x * za;
                }
            }
        }
    }
    let mut out = DMatrix::zeros(rows, r);
    for row in 0..rows {
        let gm = &grams[row * r * r..(row + 1) * r * r];
        let gram = DMatrix::from_fn(r, r, |a, b| if a >= b { gm[a * r + b] } else { gm[b * r + a] });
        let y = DVector::from_column_slice(&rhs[row * r..(row + 1) * r]);
        out.row_mut(row).copy_from(&solve_gram(gram, &y).transpose());
    }
    out
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Solves `G x = y` for symmetric PSD `G`: Cholesky when well conditioned,
/// otherwise the minimum-norm pseudo-inverse solution.
fn solve_gram(gram: DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = gram.clone().cholesky() {
        let d = ch.l_dirty().diagonal();
        let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if hi > 0.0 && lo > 1e-7 * hi {
            return ch.solve(y);
        }
    }
    lstsq_min_norm(&gram, y)
}

fn objective(t: &PageTensor, a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let [n0, n1, n2] = t.dims;
    let r = a.ncols();
    let cr = row_major(c);
    let mut sse = 0.0;
    let mut ab = vec![0.0; r];
    for i in 0..n0 {
        for j in 0..n1 {
            for (s, v) in ab.iter_mut().enumerate() {
                *v = a[(i, s)] * b[(j, s)];
            }
            for k in 0..n2 {
                let off = (i * n1 + j) * n2 + k;
                if t.mask[off] {
                    let ck = &cr[k * r..(k + 1) * r];
                    let fit: f64 = ab.iter().zip(ck).map(|(x, y)| x * y).sum();
                    sse += (t.data[off] - fit).powi(2);
                }
            }
        }
    }
    sse
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TssaConfig {
    /// `None` picks `⌊√T⌋`.
    pub window: Option<usize>,
    pub rank: usize,
    #[serde(default)]
    pub als: AlsOptions,
}

impl TssaConfig {
    pub fn new(rank: usize) -> Self {
        TssaConfig {
            window: None,
            rank,
            als: AlsOptions::default(),
        }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = Some(window);
        self
    }

    pub fn resolved_window(&self, t: usize) -> usize {
        self.window.unwrap_or(((t as f64).sqrt().floor() as usize).max(1))
    }
}

#[derive(Debug, Clone)]
pub struct TssaResult {
    /// `N × T` estimates.
    pub estimates: DMatrix<f64>,
    pub window: usize,
    pub rank: usize,
    pub fits: Vec<(Range<usize>, CpModel)>,
    pub warnings: Vec<String>,
}

/// Imputes the panel by CP-completing its Page tensor on each embedded range.
pub fn tssa_impute(p: &Panel, cfg: &TssaConfig) -> Result<TssaResult> {
    let (n, t) = (p.n_series(), p.len());
    let window = cfg.resolved_window(t);
    if window > t {
        return Err(Error::Embed(format!("window length {window} invalid for series length {t}")));
    }
    let (estimates, fits) = over_ranges(n, t, window, |start, blocks| {
        let tensor = page_tensor_range(p, window, start, blocks)?;
        let model = te3_fit(&tensor, cfg.rank, &cfg.als)?;
        let mut out = DMatrix::zeros(n, blocks * window);
        for i in 0..n {
            for j in 0..blocks {
                for k in 0..window {
                    out[(i, j * window + k)] = model.value(i, j, k);
                }
            }
        }
        Ok((out, model))
    })?;
    let warnings = fits
        .iter()
        .filter(|(_, m)| !m.converged)
        .map(|(r, _)| format!("CP-ALS on times {}..{} stopped before converging", r.start, r.end))
        .collect();
    Ok(TssaResult {
        estimates,
        window,
        rank: cfg.rank,
        fits,
        warnings,
    })
}

/// The matrix-estimation baseline: HSVT on the raw `N × T` observations.
pub fn vanilla_me_impute(p: &Panel, policy: RankPolicy) -> Result<ImputeResult> {
    impute(p, &ImputeConfig::new(Method::Me, policy))
}

/// Factor panels with `r` harmonic factors of `harmonics` cosines each, so
/// `G = 2·harmonics`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    pub n: usize,
    pub t: usize,
    pub factors: usize,
    pub harmonics: usize,
    pub sigma: f64,
    pub rho: f64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub als: AlsOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeRow {
    pub seed: u64,
    pub mssa: f64,
    pub tssa: f64,
    pub me: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub mssa_window: usize,
    pub tssa_window: usize,
    pub rows: Vec<RegimeRow>,
}

impl RegimeReport {
    /// Seeds on which mSSA's ImpErr is no worse than tSSA's.
    pub fn mssa_wins(&self) -> usize {
        self.rows.iter().filter(|r| r.mssa <= r.tssa).count()
    }
}

/// ImpErr of mSSA, tSSA and ME per seed, each run at its oracle rank
/// (`R·G` for the two embeddings, `R` for ME).
pub fn compare_regimes(cfg: &RegimeConfig) -> Result<RegimeReport> {
    if cfg.factors == 0 || cfg.harmonics == 0 {
        return Err(Error::InvalidArgument("regime comparison needs at least one harmonic factor".into()));
    }
    let rg = cfg.factors * 2 * cfg.harmonics;
    let tssa_cfg = TssaConfig {
        window: None,
        rank: rg,
        als: cfg.als,
    };
    let mssa_cfg = ImputeConfig::new(Method::Mssa, RankPolicy::Fixed(rg));
    let mut rows = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let latent = generate_latent(&FactorModelSpec::harmonic(cfg.n, cfg.t, cfg.factors, cfg.harmonics, seed))?;
        let noise = if cfg.sigma > 0.0 {
            NoiseModel::Gaussian { sigma: cfg.sigma }
        } else {
            NoiseModel::None
        };
        let p = corrupt(&latent, &CorruptionSpec::new(cfg.rho, noise, seed.wrapping_add(1)))?;
        let mssa = impute(&p, &mssa_cfg)?;
        let tssa = tssa_impute(&p, &tssa_cfg)?;
        let me = vanilla_me_impute(&p, RankPolicy::Fixed(cfg.factors))?;
        rows.push(RegimeRow {
            seed,
            mssa: imp_err(&latent.values, &mssa.estimates),
            tssa: imp_err(&latent.values, &tssa.estimates),
            me: imp_err(&latent.values, &me.estimates),
        });
    }
    Ok(RegimeReport {
        mssa_window: mssa_cfg.resolved_window(cfg.n, cfg.t),
        tssa_window: tssa_cfg.resolved_window(cfg.t),
        rows,
    })
}
