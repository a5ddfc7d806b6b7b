//! Multivariate time-series panel with an observation mask.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N` aligned series over `T` steps. Row `n` is series `n`; column `t` is time `t0 + t`.
///
/// Unobserved cells never carry information. They are stored as `0` on
/// construction and only change under [`Panel::initialize_missing`].
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    values: DMatrix<f64>,
    mask: DMatrix<bool>,
    series_names: Vec<String>,
    t0: i64,
}

/// Ground-truth latent means (and optionally per-cell noise variances).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPanel {
    pub values: DMatrix<f64>,
    pub variances: Option<DMatrix<f64>>,
}

/// How unobserved cells are filled before embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingInit {
    #[default]
    Zero,
    ForwardBackwardFill,
}

/// Result of [`Panel::initialize_missing`].
#[derive(Debug, Clone)]
pub struct Initialized {
    pub panel: Panel,
    /// Series that had no observation at all and were zero-filled instead.
    pub zero_fallback: Vec<usize>,
}

impl Panel {
    pub fn new(values: DMatrix<f64>, mask: DMatrix<bool>) -> Result<Self> {
        let names = (0..values.nrows()).map(|n| format!("s{n}")).collect();
        Self::with_names(values, mask, names, 0)
    }

    pub fn with_names(
        mut values: DMatrix<f64>,
        mask: DMatrix<bool>,
        series_names: Vec<String>,
        t0: i64,
    ) -> Result<Self> {
        if values.shape() != mask.shape() {
            return Err(Error::InvalidArgument(format!(
                "values {:?} and mask {:?} differ in shape",
                values.shape(),
                mask.shape()
            )));
        }
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidArgument("panel must have N ≥ 1 and T ≥ 1".into()));
        }
        if series_names.len() != values.nrows() {
            return Err(Error::InvalidArgument(format!(
                "{} series names for {} series",
                series_names.len(),
                values.nrows()
            )));
        }
        values.zip_apply(&mask, |v, observed| {
            if !observed {
                *v = 0.0;
            }
        });
        Ok(Panel {
            values,
            mask,
            series_names,
            t0,
        })
    }

    /// Fully observed panel.
    pub fn observed(values: DMatrix<f64>) -> Self {
        let mask = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self::new(values, mask).expect("non-empty matrix")
    }

    pub fn n_series(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn series_names(&self) -> &[String] {
        &self.series_names
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    pub fn is_observed(&self, series: usize, t: usize) -> bool {
        self.mask[(series, t)]
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// `max(1/cells, observed/cells)` over the given series (all series when `None`).
    pub fn observed_fraction(&self, series: Option<Range<usize>>) -> f64 {
        let rows = series.unwrap_or(0..self.n_series());
        let view = self.mask.rows(rows.start, rows.len());
        mask_fraction(&view.into_owned(), None)
    }

    pub fn initialize_missing(&self, policy: MissingInit) -> Initialized {
        let mut out = self.clone();
        let mut zero_fallback = Vec::new();
        match policy {
            MissingInit::Zero => {
                out.values.zip_apply(&self.mask, |v, observed| {
                    if !observed {
                        *v = 0.0;
                    }
                });
            }
            MissingInit::ForwardBackwardFill => {
                for n in 0..self.n_series() {
                    let first = (0..self.len()).find(|&t| self.mask[(n, t)]);
                    let Some(first) = first else {
                        log::warn!("series {n} has no observations; falling back to zero fill");
                        zero_fallback.push(n);
                        for t in 0..self.len() {
                            out.values[(n, t)] = 0.0;
                        }
                        continue;
                    };
                    let mut last = self.values[(n, first)];
                    for t in 0..self.len() {
                        if self.mask[(n, t)] {
                            last = self.values[(n, t)];
                        } else {
                            out.values[(n, t)] = last;
                        }
                    }
                }
            }
        }
        Initialized {
            panel: out,
            zero_fallback,
        }
    }

    /// Sub-panel over a contiguous range of series.
    pub fn select_series(&self, rows: Range<usize>) -> Result<Panel> {
        if rows.is_empty() || rows.end > self.n_series() {
            return Err(Error::InvalidArgument(format!(
                "series range {rows:?} outside 0..{}",
                self.n_series()
            )));
        }
        Panel::with_names(
            self.values.rows(rows.start, rows.len()).into_owned(),
            self.mask.rows(rows.start, rows.len()).into_owned(),
            self.series_names[rows].to_vec(),
            self.t0,
        )
    }

    /// Sub-panel over a contiguous time range.
    pub fn slice_time(&self, cols: Range<usize>) -> Result<Panel> {
        if cols.is_empty() || cols.end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "time range {cols:?} outside 0..{}",
                self.len()
            )));
        }
        Panel::with_names(
            self.values.columns(cols.start, cols.len()).into_owned(),
            self.mask.columns(cols.start, cols.len()).into_owned(),
            self.series_names.clone(),
            self.t0 + cols.start as i64,
        )
    }

    /// Same values with a different mask; cells hidden by the new mask are zeroed.
    pub fn with_mask(&self, mask: DMatrix<bool>) -> Result<Panel> {
        Panel::with_names(self.values.clone(), mask, self.series_names.clone(), self.t0)
    }

    /// Element-wise square of the observed values, mask unchanged.
    pub fn squared(&self) -> Panel {
        let mut out = self.clone();
        out.values.zip_apply(&self.mask, |v, observed| {
            *v = if observed { *v * *v } else { 0.0 };
        });
        out
    }

    /// Wide CSV: header row of series names, one row per time step.
    pub fn read_csv<R: Read>(reader: R, missing_token: &str) -> Result<Panel> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if names.is_empty() {
            return Err(Error::Ingest("empty header".into()));
        }
        let n = names.len();
        let mut cols: Vec<(Vec<f64>, Vec<bool>)> = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            // row 1 is the header
            let row = i + 2;
            if record.len() != n {
                return Err(Error::Ingest(format!(
                    "row {row} has {} fields, expected {n}",
                    record.len()
                )));
            }
            let mut vals = Vec::with_capacity(n);
            let mut obs = Vec::with_capacity(n);
            for (column, cell) in record.iter().enumerate() {
                let cell = cell.trim();
                if cell == missing_token {
                    vals.push(0.0);
                    obs.push(false);
                } else {
                    let v: f64 = cell.parse().map_err(|e| Error::Parse {
                        row,
                        column: column + 1,
                        message: format!("{cell:?}: {e}"),
                    })?;
                    vals.push(v);
                    obs.push(true);
                }
            }
            cols.push((vals, obs));
        }
        if cols.is_empty() {
            return Err(Error::Ingest("no data rows".into()));
        }
        let t = cols.len();
        let values = DMatrix::from_fn(n, t, |r, c| cols[c].0[r]);
        let mask = DMatrix::from_fn(n, t, |r, c| cols[c].1[r]);
        Panel::with_names(values, mask, names, 0)
    }

    pub fn load_csv(path: impl AsRef<Path>, missing_token: &str) -> Result<Panel> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, missing_token)
    }

    pub fn write_csv<W: Write>(&self, writer: W, missing_token: &str) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.series_names)?;
        for t in 0..self.len() {
            let row: Vec<String> = (0..self.n_series())
                .map(|n| {
                    if self.mask[(n, t)] {
                        format!("{}", self.values[(n, t)])
                    } else {
                        missing_token.to_string()
                    }
                })
                .collect();
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, missing_token: &str) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file, missing_token)
    }
}

impl LatentPanel {
    pub fn new(values: DMatrix<f64>) -> Self {
        LatentPanel {
            values,
            variances: None,
        }
    }

    pub fn with_variances(values: DMatrix<f64>, variances: DMatrix<f64>) -> Result<Self> {
        if values.shape() != variances.shape() {
            return Err(Error::InvalidArgument("variance grid shape mismatch".into()));
        }
        if variances.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument("variances must be ≥ 0".into()));
        }
        Ok(LatentPanel {
            values,
            variances: Some(variances),
        })
    }

    pub fn n_series(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Observed fraction of a mask, floored at one virtual observation:
/// `max(1/cells, observed/cells)`. `rows` restricts the count to a row range.
pub fn mask_fraction(mask: &DMatrix<bool>, rows: Option<Range<usize>>) -> f64 {
    let rows = rows.unwrap_or(0..mask.nrows());
    let cells = rows.len() * mask.ncols();
    if cells == 0 {
        return 1.0;
    }
    let observed = mask.rows(rows.start, rows.len()).iter().filter(|&&m| m).count();
    (observed.max(1)) as f64 / cells as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel_from_rows(rows: &[&[Option<f64>]]) -> Panel {
        let n = rows.len();
        let t = rows[0].len();
        let values = DMatrix::from_fn(n, t, |r, c| rows[r][c].unwrap_or(0.0));
        let mask = DMatrix::from_fn(n, t, |r, c| rows[r][c].is_some());
        Panel::new(values, mask).unwrap()
    }

    #[test]
    fn csv_missing_token_marks_mask() {
        let p = Panel::read_csv("a,b\n1,2\n,4".as_bytes(), "").unwrap();
        assert_eq!((p.n_series(), p.len()), (2, 2));
        assert!(!p.is_observed(0, 1));
        assert!(p.is_observed(1, 1));
        assert_eq!(p.values()[(1, 1)], 4.0);
    }

    #[test]
    fn csv_fully_present_has_unit_fraction() {
        let p = Panel::read_csv("a,b\n1,2\n3,4".as_bytes(), "").unwrap();
        assert_eq!(p.observed_fraction(None), 1.0);
    }

    #[test]
    fn csv_single_series() {
        let p = Panel::read_csv("a\n1\n2\n3".as_bytes(), "").unwrap();
        assert_eq!((p.n_series(), p.len()), (1, 3));
        assert_eq!(p.values().row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn csv_ragged_rows_rejected() {
        let err = Panel::read_csv("a,b\n1,2\n3".as_bytes(), "").unwrap_err();
        assert!(matches!(err, Error::Ingest(_)), "{err}");
    }

    #[test]
    fn csv_non_numeric_reports_position() {
        let err = Panel::read_csv("a,b\n1,2\n3,x".as_bytes(), "").unwrap_err();
        match err {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (3, 2)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn csv_custom_missing_token() {
        let p = Panel::read_csv("a\nNA\n2".as_bytes(), "NA").unwrap();
        assert!(!p.is_observed(0, 0));
    }

    #[test]
    fn forward_backward_fill() {
        let p = panel_from_rows(&[&[None, Some(5.0), None]]);
        let out = p.initialize_missing(MissingInit::ForwardBackwardFill);
        assert_eq!(out.panel.values().row(0).iter().copied().collect::<Vec<_>>(), vec![5.0; 3]);
        assert_eq!(out.panel.mask(), p.mask());
    }

    #[test]
    fn zero_fill() {
        let p = panel_from_rows(&[&[Some(1.0), None, Some(3.0)]]);
        let out = p.initialize_missing(MissingInit::Zero);
        assert_eq!(out.panel.values().row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 3.0]);
    }

    #[test]
    fn all_missing_series_falls_back_to_zero() {
        let p = panel_from_rows(&[&[None, None], &[Some(1.0), None]]);
        let out = p.initialize_missing(MissingInit::ForwardBackwardFill);
        assert_eq!(out.zero_fallback, vec![0]);
        assert_eq!(out.panel.values()[(0, 1)], 0.0);
        assert_eq!(out.panel.values()[(1, 1)], 1.0);
        let zero = p.initialize_missing(MissingInit::Zero);
        assert!(zero.panel.values().row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn observed_fraction_floor_and_half() {
        let none = panel_from_rows(&[&[None, None], &[None, None]]);
        assert_eq!(none.observed_fraction(None), 0.25);
        let half = panel_from_rows(&[&[Some(1.0), None], &[None, Some(2.0)]]);
        assert_eq!(half.observed_fraction(None), 0.5);
        assert_eq!(half.observed_fraction(Some(0..1)), 0.5);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let err = Panel::new(DMatrix::zeros(2, 3), DMatrix::from_element(3, 2, true));
        assert!(err.is_err());
    }
}
