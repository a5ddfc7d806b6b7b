//! Page, stacked Page, Hankel and Page-tensor embeddings with their index maps.
//!
//! All indices are zero-based: Page entry `(i, j)` of the embedded range
//! starting at `start` holds time `start + i + j·L`.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Panel;

/// Embedded ranges for a series of length `t` and window `l`.
///
/// The first range is the prefix of `⌊t/l⌋·l` points. When `l` does not divide
/// `t` a second range of the same length ending at `t` is added so every time
/// point is covered by at least one range.
pub fn segment_ranges(t: usize, l: usize) -> Result<Vec<Range<usize>>> {
    if l == 0 {
        return Err(Error::Embed("window length must be ≥ 1".into()));
    }
    if l > t {
        return Err(Error::Embed(format!("window length {l} exceeds series length {t}")));
    }
    let span = (t / l) * l;
    let mut ranges = Vec::with_capacity(2);
    ranges.push(0..span);
    if span < t {
        ranges.push(t - span..t);
    }
    Ok(ranges)
}

/// `L × (T/L)` Page matrix of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct PageMatrix {
    pub data: DMatrix<f64>,
    pub mask: DMatrix<bool>,
    pub window: usize,
    pub series: usize,
    /// First embedded time index.
    pub start: usize,
    /// Time points left out of this embedding (the tail when `L ∤ T`).
    pub uncovered: Range<usize>,
}

impl PageMatrix {
    pub fn blocks(&self) -> usize {
        self.data.ncols()
    }

    pub fn time_of(&self, row: usize, col: usize) -> usize {
        self.start + row + col * self.window
    }

    pub fn cell_of(&self, t: usize) -> Option<(usize, usize)> {
        let off = t.checked_sub(self.start)?;
        let (row, col) = (off % self.window, off / self.window);
        (col < self.blocks()).then_some((row, col))
    }

    /// Column-major unfolding back to the embedded segment.
    pub fn unfold(&self) -> Vec<f64> {
        self.data.iter().copied().collect()
    }
}

/// Page matrix of the prefix `0..⌊T/L⌋·L` of one series.
pub fn page(p: &Panel, series: usize, l: usize) -> Result<PageMatrix> {
    let ranges = segment_ranges(p.len(), l)?;
    let mut pm = page_range(p, series, l, ranges[0].start, ranges[0].len() / l)?;
    pm.uncovered = ranges[0].end..p.len();
    Ok(pm)
}

/// Page matrix of `blocks·l` points of one series starting at `start`.
pub fn page_range(p: &Panel, series: usize, l: usize, start: usize, blocks: usize) -> Result<PageMatrix> {
    if series >= p.n_series() {
        return Err(Error::Embed(format!("series {series} out of range")));
    }
    if l == 0 || blocks == 0 || start + l * blocks > p.len() {
        return Err(Error::Embed(format!(
            "cannot embed {blocks} blocks of length {l} from t={start} in a series of length {}",
            p.len()
        )));
    }
    let vals = p.values();
    let mask = p.mask();
    Ok(PageMatrix {
        data: DMatrix::from_fn(l, blocks, |i, j| vals[(series, start + i + j * l)]),
        mask: DMatrix::from_fn(l, blocks, |i, j| mask[(series, start + i + j * l)]),
        window: l,
        series,
        start,
        uncovered: 0..0,
    })
}

/// Column-wise concatenation of the per-series Page matrices: `L × (N·T/L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedPage {
    pub data: DMatrix<f64>,
    pub mask: DMatrix<bool>,
    pub window: usize,
    /// Page columns contributed by each series.
    pub blocks: usize,
    pub start: usize,
    pub uncovered: Range<usize>,
}

impl StackedPage {
    pub fn n_series(&self) -> usize {
        self.data.ncols() / self.blocks
    }

    /// Column → (series, block column).
    pub fn column_owner(&self, col: usize) -> (usize, usize) {
        (col / self.blocks, col % self.blocks)
    }

    /// Entry `(row, col)` → (series, time).
    pub fn time_of(&self, row: usize, col: usize) -> (usize, usize) {
        let (n, j) = self.column_owner(col);
        (n, self.start + row + j * self.window)
    }

    /// Writes an `L × (N·T/L)` grid back to `(series, time)` cells.
    pub fn scatter(&self, grid: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        for col in 0..grid.ncols() {
            for row in 0..grid.nrows() {
                let (n, t) = self.time_of(row, col);
                out[(n, t)] = grid[(row, col)];
            }
        }
    }
}

/// Stacked Page matrix of the prefix `0..⌊T/L⌋·L` of every series.
pub fn stacked_page(p: &Panel, l: usize) -> Result<StackedPage> {
    let ranges = segment_ranges(p.len(), l)?;
    let mut sp = stacked_page_range(p, l, ranges[0].start, ranges[0].len() / l)?;
    sp.uncovered = ranges[0].end..p.len();
    Ok(sp)
}

pub fn stacked_page_range(p: &Panel, l: usize, start: usize, blocks: usize) -> Result<StackedPage> {
    if l == 0 || blocks == 0 || start + l * blocks > p.len() {
        return Err(Error::Embed(format!(
            "cannot embed {blocks} blocks of length {l} from t={start} in a series of length {}",
            p.len()
        )));
    }
    let vals = p.values();
    let mask = p.mask();
    let at = |i: usize, c: usize| (c / blocks, start + i + (c % blocks) * l);
    Ok(StackedPage {
        data: DMatrix::from_fn(l, p.n_series() * blocks, |i, c| vals[at(i, c)]),
        mask: DMatrix::from_fn(l, p.n_series() * blocks, |i, c| mask[at(i, c)]),
        window: l,
        blocks,
        start,
        uncovered: 0..0,
    })
}

/// Hankel (trajectory) matrix `H[i][j] = x(start + i + j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    pub data: DMatrix<f64>,
}

impl HankelMatrix {
    /// `⌊T/2⌋ × ⌊T/2⌋` Hankel matrix of a fully observed series.
    pub fn square(x: &[f64]) -> Result<Self> {
        let h = x.len() / 2;
        if h == 0 {
            return Err(Error::Embed("series too short for a Hankel matrix".into()));
        }
        Ok(HankelMatrix {
            data: DMatrix::from_fn(h, h, |i, j| x[i + j]),
        })
    }

    /// `L × (T − L + 1)` trajectory matrix.
    pub fn trajectory(x: &[f64], l: usize) -> Result<Self> {
        if l == 0 || l > x.len() {
            return Err(Error::Embed(format!("window {l} invalid for length {}", x.len())));
        }
        Ok(HankelMatrix {
            data: DMatrix::from_fn(l, x.len() - l + 1, |i, j| x[i + j]),
        })
    }
}

pub fn hankel(x: &[f64]) -> Result<HankelMatrix> {
    HankelMatrix::square(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Per-series Hankels side by side.
    Horizontal,
    /// Per-series Hankels on top of each other.
    Vertical,
}

/// Per-series Hankel matrices stacked horizontally or vertically, with masks.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedHankel {
    pub data: DMatrix<f64>,
    pub mask: DMatrix<bool>,
    pub orientation: Orientation,
    pub window: usize,
    /// Columns per Hankel block.
    pub width: usize,
}

impl StackedHankel {
    /// Maps an entry to (series, time).
    pub fn time_of(&self, row: usize, col: usize) -> (usize, usize) {
        match self.orientation {
            Orientation::Horizontal => (col / self.width, row + col % self.width),
            Orientation::Vertical => (row / self.window, row % self.window + col),
        }
    }

    /// Averages every entry that maps to the same (series, time) cell.
    pub fn diagonal_average(&self, grid: &DMatrix<f64>, n: usize, t: usize) -> DMatrix<f64> {
        let mut sum = DMatrix::<f64>::zeros(n, t);
        let mut count = DMatrix::<f64>::zeros(n, t);
        for col in 0..grid.ncols() {
            for row in 0..grid.nrows() {
                let cell = self.time_of(row, col);
                sum[cell] += grid[(row, col)];
                count[cell] += 1.0;
            }
        }
        sum.zip_map(&count, |s: f64, c: f64| if c > 0.0 { s / c } else { 0.0 })
    }
}

/// Stacked Hankel matrices of a (zero-initialized) panel.
///
/// `window = None` uses the square `⌊T/2⌋ × ⌊T/2⌋` form; otherwise the
/// `L × (T−L+1)` trajectory form. A missing observation stays missing in
/// every Hankel position it occupies.
pub fn stacked_hankel(p: &Panel, orientation: Orientation, window: Option<usize>) -> Result<StackedHankel> {
    let t = p.len();
    let (l, width) = match window {
        None => (t / 2, t / 2),
        Some(l) => (l, t.saturating_sub(l) + 1),
    };
    if l == 0 || l > t {
        return Err(Error::Embed(format!("window {l} invalid for length {t}")));
    }
    let n = p.n_series();
    let (rows, cols) = match orientation {
        Orientation::Horizontal => (l, n * width),
        Orientation::Vertical => (n * l, width),
    };
    let mut sh = StackedHankel {
        data: DMatrix::zeros(rows, cols),
        mask: DMatrix::from_element(rows, cols, false),
        orientation,
        window: l,
        width,
    };
    for col in 0..cols {
        for row in 0..rows {
            let cell = sh.time_of(row, col);
            sh.data[(row, col)] = p.values()[cell];
            sh.mask[(row, col)] = p.mask()[cell];
        }
    }
    Ok(sh)
}

/// Order-three Page tensor `N × (T/L) × L`: entry `[n][s][ℓ]` is `Xₙ(start + s·L + ℓ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PageTensor {
    pub data: Vec<f64>,
    pub mask: Vec<bool>,
    pub dims: [usize; 3],
    pub start: usize,
}

impl PageTensor {
    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> (f64, bool)) -> Self {
        let len = dims[0] * dims[1] * dims[2];
        let mut data = Vec::with_capacity(len);
        let mut mask = Vec::with_capacity(len);
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                for c in 0..dims[2] {
                    let (v, m) = f(a, b, c);
                    data.push(v);
                    mask.push(m);
                }
            }
        }
        PageTensor {
            data,
            mask,
            dims,
            start: 0,
        }
    }

    #[inline]
    pub fn offset(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.dims[1] + b) * self.dims[2] + c
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[self.offset(a, b, c)]
    }

    #[inline]
    pub fn observed(&self, a: usize, b: usize, c: usize) -> bool {
        self.mask[self.offset(a, b, c)]
    }

    pub fn window(&self) -> usize {
        self.dims[2]
    }

    pub fn time_of(&self, block: usize, lag: usize) -> usize {
        self.start + block * self.dims[2] + lag
    }

    pub fn observed_fraction(&self) -> f64 {
        let obs = self.mask.iter().filter(|&&m| m).count();
        obs.max(1) as f64 / self.mask.len().max(1) as f64
    }
}

/// Page tensor of the prefix `0..⌊T/L⌋·L`.
pub fn page_tensor(p: &Panel, l: usize) -> Result<PageTensor> {
    let ranges = segment_ranges(p.len(), l)?;
    page_tensor_range(p, l, ranges[0].start, ranges[0].len() / l)
}

pub fn page_tensor_range(p: &Panel, l: usize, start: usize, blocks: usize) -> Result<PageTensor> {
    if l == 0 || blocks == 0 || start + l * blocks > p.len() {
        return Err(Error::Embed(format!(
            "cannot embed {blocks} blocks of length {l} from t={start} in a series of length {}",
            p.len()
        )));
    }
    let (vals, mask) = (p.values(), p.mask());
    let mut tensor = PageTensor::from_fn([p.n_series(), blocks, l], |n, s, k| {
        let t = start + s * l + k;
        (vals[(n, t)], mask[(n, t)])
    });
    tensor.start = start;
    Ok(tensor)
}
