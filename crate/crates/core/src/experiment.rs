//! Config-driven experiments: grid search over embedding and rank choices with
//! validation splits, scored on a held-out test split and written as CSV/JSON.
//!
//! A config is a JSON object:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "task": "impute",
//!   "seed": 7,
//!   "data": { "source": "harmonic", "n": 10, "t": 1000, "factors": 1, "harmonics": 2,
//!             "corruption": { "rho": 0.7, "noise": { "kind": "gaussian", "sigma": 0.3 } } },
//!   "grid": { "windows": [null, 50], "policies": [{ "fixed": 4 }, "median"] },
//!   "output_dir": "out"
//! }
//! ```
//!
//! Unknown keys are rejected with the full list of offending paths.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{mssa_suitability, rank_scaling_report, Verdict, WindowRule};
use crate::error::{Error, Result};
use crate::hsvt::RankPolicy;
use crate::metrics::{imp_err, nrmse, Standardizer};
use crate::panel::{LatentPanel, MissingInit, Panel};
use crate::ssa::{impute, rolling_forecast, ForecastConfig, ImputeConfig, Method};
use crate::synth::{corrupt, generate_latent, harmonic_mixture_panel, rng_for, CorruptionSpec, FactorModelSpec};
use crate::tssa::{compare_regimes, tssa_impute, AlsOptions, RegimeConfig, TssaConfig};
use crate::variance::{estimate_variance, VarianceConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Impute,
    Forecast,
    Variance,
    Diagnose,
    Regimes,
}

impl Task {
    fn label(&self) -> &'static str {
        match self {
            Task::Impute => "impute",
            Task::Forecast => "forecast",
            Task::Variance => "variance",
            Task::Diagnose => "diagnose",
            Task::Regimes => "regimes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// One series per column; the first row holds series names.
    Csv {
        path: PathBuf,
        #[serde(default)]
        missing_token: String,
    },
    /// An explicit factor model.
    Factor {
        model: FactorModelSpec,
        corruption: CorruptionSpec,
    },
    /// `factors` random harmonic factors of `harmonics` cosines each.
    Harmonic {
        n: usize,
        t: usize,
        factors: usize,
        harmonics: usize,
        #[serde(default)]
        seed: u64,
        corruption: CorruptionSpec,
    },
    /// The tensor-structured harmonic mixture with `n·m` series.
    Mixture {
        n: usize,
        m: usize,
        r: usize,
        t: usize,
        #[serde(default)]
        seed: u64,
        corruption: CorruptionSpec,
    },
}

/// A loaded panel, with its ground truth when the source is synthetic.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub panel: Panel,
    pub latent: Option<LatentPanel>,
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        let synthetic = |latent: LatentPanel, c: &CorruptionSpec| -> Result<Dataset> {
            let latent = c.latent_with_variance(&latent)?;
            Ok(Dataset {
                panel: corrupt(&latent, c)?,
                latent: Some(latent),
            })
        };
        match self {
            DataSource::Csv { path, missing_token } => Ok(Dataset {
                panel: Panel::load_csv(path, missing_token)?,
                latent: None,
            }),
            DataSource::Factor { model, corruption } => synthetic(generate_latent(model)?, corruption),
            DataSource::Harmonic {
                n,
                t,
                factors,
                harmonics,
                seed,
                corruption,
            } => synthetic(
                generate_latent(&FactorModelSpec::harmonic(*n, *t, *factors, *harmonics, *seed))?,
                corruption,
            ),
            DataSource::Mixture {
                n,
                m,
                r,
                t,
                seed,
                corruption,
            } => synthetic(harmonic_mixture_panel(*n, *m, *r, *t, *seed)?, corruption),
        }
    }
}

fn default_windows() -> Vec<Option<usize>> {
    vec![None]
}
fn default_policies() -> Vec<RankPolicy> {
    vec![RankPolicy::default()]
}
fn default_methods() -> Vec<Method> {
    vec![Method::Mssa]
}
fn default_inits() -> Vec<MissingInit> {
    vec![MissingInit::Zero]
}

/// Cartesian grid of hyper-parameters. `null` in `windows` means the method's default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(default = "default_windows")]
    pub windows: Vec<Option<usize>>,
    #[serde(default = "default_policies")]
    pub policies: Vec<RankPolicy>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_inits")]
    pub inits: Vec<MissingInit>,
    /// CP ranks for additional tSSA grid points (imputation only).
    #[serde(default)]
    pub tssa_ranks: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            windows: default_windows(),
            policies: default_policies(),
            methods: default_methods(),
            inits: default_inits(),
            tssa_ranks: Vec::new(),
        }
    }
}

/// Half-open time ranges `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: [usize; 2],
    pub val: [usize; 2],
    pub test: [usize; 2],
}

impl Splits {
    fn range(s: [usize; 2]) -> Range<usize> {
        s[0]..s[1]
    }

    pub fn train(&self) -> Range<usize> {
        Self::range(self.train)
    }
    pub fn val(&self) -> Range<usize> {
        Self::range(self.val)
    }
    pub fn test(&self) -> Range<usize> {
        Self::range(self.test)
    }

    /// Each split must be a non-empty range inside `0..t`; splits may not overlap.
    pub fn validate(&self, t: usize) -> Result<()> {
        let named = [("train", self.train), ("val", self.val), ("test", self.test)];
        for (name, [a, b]) in named {
            if a >= b || b > t {
                return Err(Error::Config(format!("split {name} = [{a}, {b}) is empty or exceeds T = {t}")));
            }
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let ([a0, a1], [b0, b1]) = (named[i].1, named[j].1);
                if a0 < b1 && b0 < a1 {
                    return Err(Error::Config(format!("splits {} and {} overlap", named[i].0, named[j].0)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputeOptions {
    /// Fraction of observed cells additionally hidden and scored.
    pub holdout_fraction: f64,
    pub repeats: usize,
}

impl Default for ImputeOptions {
    fn default() -> Self {
        ImputeOptions {
            holdout_fraction: 0.1,
            repeats: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastOptions {
    pub horizon: usize,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        ForecastOptions { horizon: 24 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarianceOptions {
    /// Ranks for the squared panel, crossed with `grid.policies` for the mean.
    pub policies_squared: Vec<RankPolicy>,
}

impl Default for VarianceOptions {
    fn default() -> Self {
        VarianceOptions {
            policies_squared: default_policies(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnoseOptions {
    /// Defaults to `[1, N]`.
    pub subset_sizes: Option<Vec<usize>>,
    pub energy: f64,
    pub window: WindowRule,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions {
            subset_sizes: None,
            energy: 0.9,
            window: WindowRule::Default,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: Option<DataSource>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub splits: Option<Splits>,
    #[serde(default)]
    pub impute: ImputeOptions,
    #[serde(default)]
    pub forecast: ForecastOptions,
    #[serde(default)]
    pub variance: VarianceOptions,
    #[serde(default)]
    pub diagnose: DiagnoseOptions,
    #[serde(default)]
    pub regimes: Option<RegimeConfig>,
    #[serde(default)]
    pub als: AlsOptions,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Size of the worker pool; `None` uses all cores.
    #[serde(default)]
    pub workers: Option<usize>,
}

/// Parses a config, rejecting unknown keys and unsupported schema versions.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut unknown = Vec::new();
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
        .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
    if !unknown.is_empty() {
        return Err(Error::Config(format!("unknown config keys: {}", unknown.join(", "))));
    }
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "schema_version {} not supported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

/// Reads a config file; relative CSV paths and output directories resolve
/// against the file's directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    if let Some(DataSource::Csv { path: csv, .. }) = &mut cfg.data {
        if csv.is_relative() {
            *csv = base.join(&*csv);
        }
    }
    if let Some(out) = &mut cfg.output_dir {
        if out.is_relative() {
            *out = base.join(&*out);
        }
    }
    Ok(cfg)
}

/// One line of the long-format report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: String,
    pub grid_id: usize,
    pub method: String,
    pub window: usize,
    pub policy: String,
    pub init: String,
    /// `val`, `test`, `full`, `selected`, or a diagnostic subset label.
    pub split: String,
    /// Repeat index, seed, or empty.
    pub repeat: String,
    pub metric: String,
    pub value: f64,
    pub selected: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub task: Task,
    pub rows: Vec<ReportRow>,
    /// Grid point chosen on the validation split.
    pub selected: Option<usize>,
    #[serde(default)]
    pub verdict: Option<Verdict>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush().map_err(|e| Error::Config(format!("writing report: {e}")))?;
        Ok(())
    }

    /// Rows of one metric for one split.
    pub fn metric(&self, split: &str, metric: &str) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.split == split && r.metric == metric).collect()
    }
}

/// Hidden-cell masks for imputation scoring.
#[derive(Debug, Clone)]
pub struct HoldoutMask {
    /// The input panel with the held-out cells removed.
    pub panel: Panel,
    /// Cells to score.
    pub scored: DMatrix<bool>,
}

#[derive(Debug, Clone)]
pub struct EvalProtocol {
    pub holdout_fraction: f64,
    pub masks: Vec<HoldoutMask>,
}

impl EvalProtocol {
    /// NRMSE of `estimate` against `truth` on the cells scored by `repeat`
    /// within `columns`.
    pub fn score(
        &self,
        repeat: usize,
        truth: &DMatrix<f64>,
        estimate: &DMatrix<f64>,
        columns: Range<usize>,
        stats: &Standardizer,
    ) -> f64 {
        let scored = &self.masks[repeat].scored;
        let within = DMatrix::from_fn(scored.nrows(), scored.ncols(), |s, t| scored[(s, t)] && columns.contains(&t));
        nrmse(truth, estimate, &within, stats)
    }
}

/// `repeats` independent masks, each hiding about `holdout_fraction` of the
/// observed cells under its own sub-seed. With a zero fraction the scored
/// cells are the originally missing ones, to be scored against a known truth.
pub fn impute_eval_protocol(p: &Panel, holdout_fraction: f64, repeats: usize, seed: u64) -> Result<EvalProtocol> {
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::InvalidArgument(format!("holdout fraction {holdout_fraction} outside [0, 1)")));
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("need at least one repeat".into()));
    }
    let masks = (0..repeats)
        .map(|r| {
            if holdout_fraction == 0.0 {
                return Ok(HoldoutMask {
                    panel: p.clone(),
                    scored: p.mask().map(|m| !m),
                });
            }
            let mut rng = rng_for(seed, r as u64);
            let (n, t) = (p.n_series(), p.len());
            let mut scored = DMatrix::from_element(n, t, false);
            for s in 0..n {
                for step in 0..t {
                    if p.is_observed(s, step) && rng.random::<f64>() < holdout_fraction {
                        scored[(s, step)] = true;
                    }
                }
            }
            let mask = p.mask().zip_map(&scored, |m, h| m && !h);
            Ok(HoldoutMask {
                panel: p.with_mask(mask)?,
                scored,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalProtocol {
        holdout_fraction,
        masks,
    })
}

/// One hyper-parameter combination.
#[derive(Debug, Clone, PartialEq)]
struct Point {
    id: usize,
    method: Method,
    /// CP rank when the point is a tSSA run.
    tssa_rank: Option<usize>,
    window: Option<usize>,
    policy: RankPolicy,
    init: MissingInit,
}

impl Point {
    fn method_label(&self) -> &'static str {
        if self.tssa_rank.is_some() {
            "tssa"
        } else {
            self.method.label()
        }
    }

    fn policy_label(&self) -> String {
        match self.tssa_rank {
            Some(r) => format!("cp:{r}"),
            None => self.policy.label(),
        }
    }

    fn row(&self, task: Task, window: usize, split: &str, repeat: String, metric: &str, value: f64) -> ReportRow {
        ReportRow {
            task: task.label().into(),
            grid_id: self.id,
            method: self.method_label().into(),
            window,
            policy: self.policy_label(),
            init: init_label(self.init).into(),
            split: split.into(),
            repeat,
            metric: metric.into(),
            value,
            selected: false,
            note: String::new(),
        }
    }
}

fn init_label(init: MissingInit) -> &'static str {
    match init {
        MissingInit::Zero => "zero",
        MissingInit::ForwardBackwardFill => "ffill_bfill",
    }
}

fn grid_points(grid: &Grid, allow_tssa: bool) -> Result<Vec<Point>> {
    if grid.windows.is_empty() || grid.policies.is_empty() || grid.methods.is_empty() || grid.inits.is_empty() {
        return Err(Error::Config("every grid axis needs at least one value".into()));
    }
    grid.policies.iter().try_for_each(RankPolicy::validate)?;
    let mut points = Vec::new();
    for &method in &grid.methods {
        for &window in &grid.windows {
            for &policy in &grid.policies {
                for &init in &grid.inits {
                    points.push(Point {
                        id: points.len(),
                        method,
                        tssa_rank: None,
                        window,
                        policy,
                        init,
                    });
                }
            }
        }
    }
    if !grid.tssa_ranks.is_empty() && !allow_tssa {
        return Err(Error::Config("tssa_ranks only apply to the impute task".into()));
    }
    for &rank in &grid.tssa_ranks {
        for &window in &grid.windows {
            points.push(Point {
                id: points.len(),
                method: Method::Mssa,
                tssa_rank: Some(rank),
                window,
                policy: RankPolicy::Fixed(rank),
                init: MissingInit::Zero,
            });
        }
    }
    Ok(points)
}

/// Runs the experiment in memory on a bounded worker pool.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        if w == 0 {
            return Err(Error::Config("workers must be ≥ 1".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_task(cfg))
}

/// Runs the experiment and writes `report.csv`, `report.json` and
/// `resolved-config.json` into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<ExperimentReport> {
    let report = run(cfg)?;
    write_outputs(cfg, &report, dir.as_ref())?;
    Ok(report)
}

pub fn write_outputs(cfg: &ExperimentConfig, report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("report.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    report.write_csv(std::io::BufWriter::new(file))?;
    for (name, text) in [
        ("report.json", serde_json::to_string_pretty(report)?),
        ("resolved-config.json", serde_json::to_string_pretty(cfg)?),
    ] {
        let path = dir.join(name);
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn run_task(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.task == Task::Regimes {
        return run_regimes(cfg);
    }
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Config(format!("task {} needs a data source", cfg.task.label())))?
        .load()?;
    let mut report = match cfg.task {
        Task::Impute => run_impute(cfg, &data)?,
        Task::Forecast => run_forecast(cfg, &data)?,
        Task::Variance => run_variance(cfg, &data)?,
        Task::Diagnose => run_diagnose(cfg, &data)?,
        Task::Regimes => unreachable!(),
    };
    if let Some(sel) = report.selected {
        for row in &mut report.rows {
            row.selected = row.grid_id == sel;
        }
    }
    report.rows.sort_by(|a, b| {
        (a.grid_id, &a.split, &a.repeat, &a.metric).cmp(&(b.grid_id, &b.split, &b.repeat, &b.metric))
    });
    Ok(report)
}

/// Lowest mean of `metric` on `split`; ties go to the lower grid id.
fn select(rows: &[ReportRow], split: &str, metric: &str) -> Option<usize> {
    let mut by_point: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.split == split && r.metric == metric) {
        let e = by_point.entry(r.grid_id).or_insert((0.0, 0));
        e.0 += r.value;
        e.1 += 1;
    }
    by_point
        .into_iter()
        .map(|(id, (sum, c))| (id, sum / c as f64))
        .filter(|(_, v)| v.is_finite())
        .fold(None, |best: Option<(usize, f64)>, (id, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((id, v)),
        })
        .map(|(id, _)| id)
}

fn summarize_selected(rows: &mut Vec<ReportRow>, selected: Option<usize>, split: &str, metric: &str) {
    let Some(sel) = selected else { return };
    let picked: Vec<&ReportRow> = rows.iter().filter(|r| r.grid_id == sel && r.split == split && r.metric == metric).collect();
    if picked.is_empty() {
        return;
    }
    let mean = picked.iter().map(|r| r.value).sum::<f64>() / picked.len() as f64;
    let mut row = picked[0].clone();
    row.split = "selected".into();
    row.repeat = String::new();
    row.metric = format!("{split}_{metric}");
    row.value = mean;
    rows.push(row);
}

fn error_row(point: &Point, task: Task, e: &Error) -> ReportRow {
    let mut row = point.row(task, point.window.unwrap_or(0), "error", String::new(), "failed", 1.0);
    row.note = e.to_string();
    row
}

fn run_impute(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentReport> {
    let p = &data.panel;
    let t = p.len();
    let (train, val, test) = match &cfg.splits {
        Some(s) => {
            s.validate(t)?;
            (s.train(), s.val(), s.test())
        }
        None => (0..t, 0..t, 0..t),
    };
    let opts = cfg.impute;
    // Validation and test draw disjoint sub-seed streams.
    let proto = impute_eval_protocol(p, opts.holdout_fraction, 2 * opts.repeats, cfg.seed)?;
    let truth = match (&data.latent, opts.holdout_fraction == 0.0) {
        (Some(lp), true) => lp.values.clone(),
        (None, true) => {
            return Err(Error::Config("holdout_fraction 0 needs a synthetic source with known truth".into()))
        }
        _ => p.values().clone(),
    };
    let stats = Standardizer::fit(p.values(), train, Some(p.mask()));
    let points = grid_points(&cfg.grid, true)?;
    let runs: Vec<(usize, usize)> = (0..points.len()).flat_map(|i| (0..2 * opts.repeats).map(move |r| (i, r))).collect();

    let estimate = |point: &Point, panel: &Panel| -> Result<(DMatrix<f64>, usize)> {
        match point.tssa_rank {
            Some(rank) => {
                let res = tssa_impute(
                    panel,
                    &TssaConfig {
                        window: point.window,
                        rank,
                        als: AlsOptions { seed: cfg.seed, ..cfg.als },
                    },
                )?;
                Ok((res.estimates, res.window))
            }
            None => {
                let ic = ImputeConfig {
                    window: point.window,
                    policy: point.policy,
                    method: point.method,
                    init: point.init,
                };
                let res = impute(panel, &ic)?;
                Ok((res.estimates, res.window))
            }
        }
    };

    let mut rows: Vec<ReportRow> = runs
        .par_iter()
        .map(|&(i, r)| {
            let point = &points[i];
            match estimate(point, &proto.masks[r].panel) {
                Ok((est, window)) => {
                    let (split, columns, rep) = if r < opts.repeats {
                        ("val", val.clone(), r)
                    } else {
                        ("test", test.clone(), r - opts.repeats)
                    };
                    let score = proto.score(r, &truth, &est, columns, &stats);
                    vec![point.row(Task::Impute, window, split, rep.to_string(), "nrmse", score)]
                }
                Err(e) if r == 0 => vec![error_row(point, Task::Impute, &e)],
                Err(_) => vec![],
            }
        })
        .flatten()
        .collect();

    if let Some(lp) = &data.latent {
        let full: Vec<ReportRow> = points
            .par_iter()
            .filter_map(|point| {
                let (est, window) = estimate(point, p).ok()?;
                Some(point.row(Task::Impute, window, "full", String::new(), "imp_err_latent", imp_err(&lp.values, &est)))
            })
            .collect();
        rows.extend(full);
    }

    let selected = select(&rows, "val", "nrmse");
    summarize_selected(&mut rows, selected, "test", "nrmse");
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        task: Task::Impute,
        rows,
        selected,
        verdict: None,
        warnings: Vec::new(),
    })
}

/// Default forecast splits: the last two blocks of about 10% of `T` (rounded
/// to whole horizons) are validation and test.
fn forecast_splits(t: usize, horizon: usize) -> Result<Splits> {
    let block = ((t / 10) / horizon).max(1) * horizon;
    if 2 * block >= t {
        return Err(Error::Config(format!("T = {t} too short for horizon {horizon}")));
    }
    Ok(Splits {
        train: [0, t - 2 * block],
        val: [t - 2 * block, t - block],
        test: [t - block, t],
    })
}

/// Expanding-window forecasts over the last `windows·horizon` steps of `p`.
fn rolling_predictions(p: &Panel, point: &Point, horizon: usize, windows: usize) -> Result<(DMatrix<f64>, usize)> {
    let fc = ForecastConfig {
        window: point.window,
        policy: point.policy,
        init: point.init,
    };
    match point.method {
        Method::Mssa => {
            let roll = rolling_forecast(p, &fc, horizon, windows)?;
            Ok((roll.predictions(), fc.resolved_window(p.n_series(), roll.eval_start())))
        }
        Method::Ssa => {
            let n = p.n_series();
            let mut out = DMatrix::zeros(n, horizon * windows);
            let mut window = 0;
            for s in 0..n {
                let roll = rolling_forecast(&p.select_series(s..s + 1)?, &fc, horizon, windows)?;
                out.row_mut(s).copy_from(&roll.predictions().row(0));
                window = fc.resolved_window(1, roll.eval_start());
            }
            Ok((out, window))
        }
        other => Err(Error::Config(format!("method {} cannot forecast", other.label()))),
    }
}

fn run_forecast(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentReport> {
    let p = &data.panel;
    let t = p.len();
    let horizon = cfg.forecast.horizon;
    if horizon == 0 {
        return Err(Error::Config("forecast horizon must be ≥ 1".into()));
    }
    let splits = match cfg.splits {
        Some(s) => {
            s.validate(t)?;
            if s.train[1] != s.val[0] || s.val[1] != s.test[0] {
                return Err(Error::Config("forecast splits must be contiguous: train, val, test".into()));
            }
            s
        }
        None => forecast_splits(t, horizon)?,
    };
    let stats = Standardizer::fit(p.values(), splits.train(), Some(p.mask()));
    let points = grid_points(&cfg.grid, false)?;
    let jobs: Vec<(usize, &str, Range<usize>)> = (0..points.len())
        .flat_map(|i| [(i, "val", splits.val()), (i, "test", splits.test())])
        .collect();

    let mut rows: Vec<ReportRow> = jobs
        .par_iter()
        .map(|(i, split, range)| {
            let point = &points[*i];
            let windows = range.len() / horizon;
            if windows == 0 {
                let e = Error::Config(format!("split {split} shorter than the horizon {horizon}"));
                return vec![error_row(point, Task::Forecast, &e)];
            }
            let history = match p.slice_time(0..range.end) {
                Ok(h) => h,
                Err(e) => return vec![error_row(point, Task::Forecast, &e)],
            };
            match rolling_predictions(&history, point, horizon, windows) {
                Ok((pred, window)) => {
                    let start = range.end - windows * horizon;
                    let span = start..range.end;
                    let mut out = Vec::new();
                    let scored = DMatrix::from_fn(p.n_series(), span.len(), |s, j| p.is_observed(s, start + j));
                    let observed = p.values().columns(start, span.len()).into_owned();
                    out.push(point.row(Task::Forecast, window, split, String::new(), "nrmse", nrmse(&observed, &pred, &scored, &stats)));
                    if let Some(lp) = &data.latent {
                        let latent = lp.values.columns(start, span.len()).into_owned();
                        let all = DMatrix::from_element(p.n_series(), span.len(), true);
                        let lstats = Standardizer::fit(&lp.values, splits.train(), None);
                        out.push(point.row(Task::Forecast, window, split, String::new(), "nrmse_latent", nrmse(&latent, &pred, &all, &lstats)));
                    }
                    out
                }
                Err(e) => vec![error_row(point, Task::Forecast, &e)],
            }
        })
        .flatten()
        .collect();

    let selected = select(&rows, "val", "nrmse");
    summarize_selected(&mut rows, selected, "test", "nrmse");
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        task: Task::Forecast,
        rows,
        selected,
        verdict: None,
        warnings: Vec::new(),
    })
}

fn run_variance(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentReport> {
    let p = &data.panel;
    let points = grid_points(&cfg.grid, false)?;
    let squared = &cfg.variance.policies_squared;
    if squared.is_empty() {
        return Err(Error::Config("variance.policies_squared needs at least one policy".into()));
    }
    let truth = data.latent.as_ref().and_then(|lp| lp.variances.as_ref());
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|i| (0..squared.len()).map(move |j| (i, j))).collect();
    let rows: Vec<ReportRow> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let point = &points[i];
            let vc = VarianceConfig {
                window: point.window,
                policy_mean: point.policy,
                policy_squared: squared[j],
                method: point.method,
            };
            match estimate_variance(p, &vc) {
                Ok(res) => {
                    let window = res.mean.window;
                    let tag = squared[j].label();
                    let mut out = vec![point.row(Task::Variance, window, "full", tag.clone(), "mean_sigma2_hat", res.sigma2_hat.mean())];
                    if let Some(var) = truth {
                        out.push(point.row(Task::Variance, window, "full", tag.clone(), "mean_sigma2_true", var.mean()));
                        out.push(point.row(Task::Variance, window, "full", tag, "mse_sigma2", imp_err(var, &res.sigma2_hat)));
                    }
                    out
                }
                Err(e) => vec![error_row(point, Task::Variance, &e)],
            }
        })
        .flatten()
        .collect();
    let selected = if truth.is_some() {
        select(&rows, "full", "mse_sigma2")
    } else {
        None
    };
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        task: Task::Variance,
        rows,
        selected,
        verdict: None,
        warnings: Vec::new(),
    })
}

fn run_diagnose(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentReport> {
    let p = &data.panel;
    let opts = &cfg.diagnose;
    let sizes = opts.subset_sizes.clone().unwrap_or_else(|| {
        let mut v = vec![1, p.n_series()];
        v.dedup();
        v
    });
    let table = rank_scaling_report(p, &sizes, opts.window, opts.energy)?;
    let verdict = mssa_suitability(&table);
    let base = ReportRow {
        task: Task::Diagnose.label().into(),
        grid_id: 0,
        method: "mssa".into(),
        window: 0,
        policy: format!("energy:{}", opts.energy),
        init: String::new(),
        split: String::new(),
        repeat: String::new(),
        metric: "effective_rank".into(),
        value: 0.0,
        selected: false,
        note: String::new(),
    };
    let mut rows = Vec::new();
    for r in &table.rows {
        rows.push(ReportRow {
            window: r.window,
            split: format!("n_sub={:06}", r.n_sub),
            value: r.effective_rank as f64,
            ..base.clone()
        });
    }
    for s in &table.single_series {
        rows.push(ReportRow {
            method: "ssa".into(),
            window: s.window,
            split: format!("series={:06}", s.series),
            value: s.effective_rank as f64,
            ..base.clone()
        });
    }
    let reference = table.rows.first().map_or(0, |r| r.window);
    rows.push(ReportRow {
        window: reference,
        split: "verdict".into(),
        metric: "suitability".into(),
        value: table.rows.last().map_or(0.0, |r| r.effective_rank as f64 / reference.max(1) as f64),
        note: format!("{}: {}", verdict.suitability, verdict.rationale),
        ..base
    });
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        task: Task::Diagnose,
        rows,
        selected: None,
        verdict: Some(verdict),
        warnings: Vec::new(),
    })
}

fn run_regimes(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let rc = cfg
        .regimes
        .as_ref()
        .ok_or_else(|| Error::Config("task regimes needs a `regimes` section".into()))?;
    let report = compare_regimes(rc)?;
    let rg = rc.factors * 2 * rc.harmonics;
    let mut rows = Vec::new();
    for row in &report.rows {
        for (method, window, policy, value) in [
            ("mssa", report.mssa_window, format!("fixed:{rg}"), row.mssa),
            ("tssa", report.tssa_window, format!("cp:{rg}"), row.tssa),
            ("me", rc.t, format!("fixed:{}", rc.factors), row.me),
        ] {
            rows.push(ReportRow {
                task: Task::Regimes.label().into(),
                grid_id: 0,
                method: method.into(),
                window,
                policy,
                init: "zero".into(),
                split: "full".into(),
                repeat: format!("{:020}", row.seed),
                metric: "imp_err".into(),
                value,
                selected: false,
                note: String::new(),
            });
        }
    }
    rows.sort_by(|a, b| (&a.repeat, &a.method).cmp(&(&b.repeat, &b.method)));
    let wins = report.mssa_wins();
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        task: Task::Regimes,
        rows,
        selected: None,
        verdict: None,
        warnings: vec![format!("mSSA ImpErr ≤ tSSA ImpErr on {wins} of {} seeds", report.rows.len())],
    })
}
