//! Effective-rank scaling of the stacked Page matrix as series are added, and
//! a rule-of-thumb verdict on whether mSSA should help over per-series SSA.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::stacked_page;
use crate::error::{Error, Result};
use crate::hsvt::effective_rank;
use crate::panel::Panel;
use crate::ssa::default_window;

/// Growth factor between the first and last subset above which ranks are "growing".
pub const GROWTH_LIMIT: f64 = 2.0;
/// A final rank below this fraction of `L` counts as small.
pub const SMALL_RANK_RATIO: f64 = 0.25;
/// A final rank below this fraction of `L` is small enough that growth does not matter.
pub const TINY_RANK_RATIO: f64 = 0.1;
/// A final rank at or above this fraction of `L` counts as approaching `L`.
pub const LARGE_RANK_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum WindowRule {
    /// `⌊√(min(N′, T)·T)⌋` for each subset size `N′`.
    #[default]
    Default,
    Fixed(usize),
}

impl WindowRule {
    pub fn window(&self, n: usize, t: usize) -> usize {
        match *self {
            WindowRule::Default => default_window(n, t),
            WindowRule::Fixed(l) => l,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRow {
    pub n_sub: usize,
    pub window: usize,
    pub effective_rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesRank {
    pub series: usize,
    pub window: usize,
    pub effective_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankScalingReport {
    pub energy: f64,
    pub t: usize,
    /// One row per subset size, in the order requested.
    pub rows: Vec<RankRow>,
    /// Page-matrix rank of each series on its own.
    pub single_series: Vec<SeriesRank>,
}

impl RankScalingReport {
    pub fn ranks(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.effective_rank).collect()
    }

    /// Long-format CSV: `kind,n_sub,series,window,effective_rank`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["kind", "n_sub", "series", "window", "effective_rank"])?;
        for r in &self.rows {
            out.write_record(["stacked", &r.n_sub.to_string(), "", &r.window.to_string(), &r.effective_rank.to_string()])?;
        }
        for s in &self.single_series {
            out.write_record(["single", "1", &s.series.to_string(), &s.window.to_string(), &s.effective_rank.to_string()])?;
        }
        out.flush().map_err(|e| Error::Config(format!("writing rank table: {e}")))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Effective ranks of the stacked Page matrix of the first `N′` series for each
/// requested `N′`, plus each series' own Page-matrix rank.
pub fn rank_scaling_report(p: &Panel, subset_sizes: &[usize], rule: WindowRule, energy: f64) -> Result<RankScalingReport> {
    if !(energy > 0.0 && energy <= 1.0) {
        return Err(Error::InvalidArgument(format!("energy must lie in (0, 1], got {energy}")));
    }
    let (n, t) = (p.n_series(), p.len());
    if let Some(&bad) = subset_sizes.iter().find(|&&s| s == 0 || s > n) {
        return Err(Error::InvalidArgument(format!("subset size {bad} outside 1..={n}")));
    }
    let rank_of = |sub: &Panel, window: usize| -> Result<usize> {
        Ok(effective_rank(&stacked_page(sub, window)?.data, energy))
    };
    let rows = subset_sizes
        .par_iter()
        .map(|&n_sub| {
            let sub = p.select_series(0..n_sub)?;
            let window = rule.window(n_sub, t);
            Ok(RankRow {
                n_sub,
                window,
                effective_rank: rank_of(&sub, window)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let single_series = (0..n)
        .into_par_iter()
        .map(|s| {
            let sub = p.select_series(s..s + 1)?;
            let window = rule.window(1, t);
            Ok(SeriesRank {
                series: s,
                window,
                effective_rank: rank_of(&sub, window)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankScalingReport {
        energy,
        t,
        rows,
        single_series,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suitability {
    Favorable,
    Unfavorable,
    Inconclusive,
}

impl fmt::Display for Suitability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suitability::Favorable => "favorable",
            Suitability::Unfavorable => "unfavorable",
            Suitability::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub suitability: Suitability,
    pub rationale: String,
}

/// Verdict from the report's ranks, compared against the window of its first row.
pub fn mssa_suitability(report: &RankScalingReport) -> Verdict {
    let window = report.rows.first().map_or(0, |r| r.window);
    suitability_from_ranks(&report.ranks(), window)
}

/// `ranks` are ordered by increasing subset size; `window` is the reference `L`.
///
/// Favorable when the last rank is below a tenth of `L`, or at most twice the
/// first and below a quarter of `L`; unfavorable when it more than doubles and
/// reaches half of `L`.
pub fn suitability_from_ranks(ranks: &[usize], window: usize) -> Verdict {
    let (Some(&first), Some(&last)) = (ranks.first(), ranks.last()) else {
        return Verdict {
            suitability: Suitability::Inconclusive,
            rationale: "no ranks to compare".into(),
        };
    };
    let growth = last as f64 / first.max(1) as f64;
    let ratio = last as f64 / window.max(1) as f64;
    let suitability = if ratio < TINY_RANK_RATIO || (growth <= GROWTH_LIMIT && ratio < SMALL_RANK_RATIO) {
        Suitability::Favorable
    } else if growth > GROWTH_LIMIT && ratio >= LARGE_RANK_RATIO {
        Suitability::Unfavorable
    } else {
        Suitability::Inconclusive
    };
    Verdict {
        suitability,
        rationale: format!(
            "rank {first} -> {last} (growth {growth:.2}, limit {GROWTH_LIMIT}); \
             final rank / L = {last}/{window} = {ratio:.3} (favorable below {TINY_RANK_RATIO}, \
             or below {SMALL_RANK_RATIO} without growth; unfavorable from {LARGE_RANK_RATIO})"
        ),
    }
}
