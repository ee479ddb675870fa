//! Long-form plot-data emission.
//!
//! Every figure family the toolkit reproduces is backed by one plain
//! long-form CSV that any plotting tool can consume. [`emit_plot_data`]
//! dispatches on a [`PlotKind`] and writes the matching table from the
//! matching [`PlotSource`]; handing it the wrong source for a kind is a
//! contract error, not a silent empty file.
//!
//! Column schemas:
//! - `Fig2Stationary` from a curve table: `alpha,beta,mean_green,individual_green`
//! - `Fig3Bars` / `Fig4Bars` from condition summaries: `condition,metric,value,se,n`
//!   (one row per condition × metric, pooled over waves)
//! - `FigS4Waves` from condition summaries: `condition,wave,metric,value,se,n`
//!   (one row per condition × wave × metric; the n-weighted average over
//!   waves reproduces the pooled table)

use std::fs;
use std::path::Path;

use crate::chain::AmplificationPoint;
use crate::error::{Error, Result};
use crate::stats::SummaryTable;

/// Which long-form table to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Stationary mean-green curves against the lone-agent response.
    Fig2Stationary,
    /// Per-condition rate bars with standard errors (first experiment).
    Fig3Bars,
    /// Per-condition rate bars with standard errors (second experiment).
    Fig4Bars,
    /// Per-wave trajectories of the same rates.
    FigS4Waves,
}

impl PlotKind {
    /// Stable name used on the command line and in file naming.
    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::Fig2Stationary => "fig2_stationary",
            PlotKind::Fig3Bars => "fig3_bars",
            PlotKind::Fig4Bars => "fig4_bars",
            PlotKind::FigS4Waves => "figS4_waves",
        }
    }
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2_stationary" => Ok(PlotKind::Fig2Stationary),
            "fig3_bars" => Ok(PlotKind::Fig3Bars),
            "fig4_bars" => Ok(PlotKind::Fig4Bars),
            "figS4_waves" => Ok(PlotKind::FigS4Waves),
            other => Err(Error::invalid(format!(
                "unknown plot kind {other:?} (expected fig2_stationary, fig3_bars, \
                 fig4_bars, or figS4_waves)"
            ))),
        }
    }
}

impl std::fmt::Display for PlotKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Data a plot table can be built from.
#[derive(Debug, Clone, Copy)]
pub enum PlotSource<'a> {
    /// Stationary amplification curve rows.
    Curves(&'a [AmplificationPoint]),
    /// Condition summaries computed from a trace.
    Summaries(&'a SummaryTable),
}

/// Write the long-form CSV for `kind` from `source`.
///
/// The source must match the kind: curves feed the stationary table,
/// summaries feed the bar and wave tables. Values are rendered with
/// Rust's shortest-round-trip float formatting, so emission is
/// deterministic and lossless.
pub fn emit_plot_data(source: PlotSource<'_>, kind: PlotKind, path: &Path) -> Result<()> {
    let text = render_plot_data(source, kind)?;
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Render the CSV text for `kind` from `source` (the pure core of
/// [`emit_plot_data`]).
pub fn render_plot_data(source: PlotSource<'_>, kind: PlotKind) -> Result<String> {
    match (kind, source) {
        (PlotKind::Fig2Stationary, PlotSource::Curves(points)) => {
            if points.is_empty() {
                return Err(Error::invalid("the curve table is empty"));
            }
            let mut out = String::from("alpha,beta,mean_green,individual_green\n");
            for p in points {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    p.alpha, p.beta, p.mean_green, p.individual_green
                ));
            }
            Ok(out)
        }
        (PlotKind::Fig3Bars | PlotKind::Fig4Bars, PlotSource::Summaries(table)) => {
            let mut out = String::from("condition,metric,value,se,n\n");
            for row in &table.pooled {
                out.push_str(&format!(
                    "{},bias,{},{},{}\n",
                    row.condition, row.bias_proportion, row.bias_se, row.n
                ));
                out.push_str(&format!(
                    "{},accuracy,{},{},{}\n",
                    row.condition, row.accuracy_proportion, row.accuracy_se, row.n
                ));
            }
            Ok(out)
        }
        (PlotKind::FigS4Waves, PlotSource::Summaries(table)) => {
            let mut out = String::from("condition,wave,metric,value,se,n\n");
            for row in &table.by_wave {
                let wave = row
                    .wave
                    .ok_or_else(|| Error::invalid("per-wave summary row is missing its wave"))?;
                out.push_str(&format!(
                    "{},{wave},bias,{},{},{}\n",
                    row.condition, row.bias_proportion, row.bias_se, row.n
                ));
                out.push_str(&format!(
                    "{},{wave},accuracy,{},{},{}\n",
                    row.condition, row.accuracy_proportion, row.accuracy_se, row.n
                ));
            }
            Ok(out)
        }
        (kind, source) => Err(Error::invalid(format!(
            "plot kind {kind} cannot be built from {}",
            match source {
                PlotSource::Curves(_) => "a curve table",
                PlotSource::Summaries(_) => "condition summaries",
            }
        ))),
    }
}
