use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::knn::ComplexityEstimate;
use crate::lenet::BoundaryId;
use crate::tensor_io::Split;

/// Boundary name used for end-to-end error rows in CSV output.
pub const END2END_NAME: &str = "END2END";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub epoch: u32,
    pub split: Split,
    pub boundary: BoundaryId,
    pub estimate: ComplexityEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEnd {
    pub epoch: u32,
    pub split: Split,
    pub n_points: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub epoch: u32,
    pub split: Split,
    pub seconds: f64,
}

/// Complexity over the (epoch, split, boundary) grid.
///
/// `cells` are ordered by epoch, then split, then boundary in network order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub config: RunConfig,
    pub cells: Vec<Cell>,
    pub end_to_end: Vec<EndToEnd>,
    /// Wall-clock time per (epoch, split); the only non-reproducible field.
    pub timings: Vec<Timing>,
}

/// One line of the long-format CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub epoch: u32,
    pub boundary_index: usize,
    pub boundary_name: String,
    pub side: String,
    pub split: Split,
    pub n_points: usize,
    pub subset_count: usize,
    pub complexity: f64,
    pub dropped_tail: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    PlotSeries,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "plot-series" => Ok(ReportFormat::PlotSeries),
            other => Err(Error::Parameter(format!("unknown report format '{other}'"))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PlotSeries {
    pub split: Split,
    pub epoch: u32,
    /// `(boundary_index, complexity)` in network order.
    pub points: Vec<(usize, f64)>,
    pub end_to_end: Option<f64>,
}

impl ProfileReport {
    /// Distinct (epoch, split) pairs in report order.
    fn epoch_splits(&self) -> Vec<(u32, Split)> {
        let mut out: Vec<(u32, Split)> = Vec::new();
        for c in &self.cells {
            if !out.contains(&(c.epoch, c.split)) {
                out.push((c.epoch, c.split));
            }
        }
        out
    }

    fn end_to_end_for(&self, epoch: u32, split: Split) -> Option<&EndToEnd> {
        self.end_to_end.iter().find(|e| e.epoch == epoch && e.split == split)
    }

    pub fn cell(&self, epoch: u32, split: Split, boundary_index: usize) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.epoch == epoch && c.split == split && c.boundary.index == boundary_index)
    }

    /// The grid in CSV row order: per (epoch, split), every boundary then END2END.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = Vec::with_capacity(self.cells.len() + self.end_to_end.len());
        for (epoch, split) in self.epoch_splits() {
            let cells: Vec<&Cell> = self
                .cells
                .iter()
                .filter(|c| c.epoch == epoch && c.split == split)
                .collect();
            for c in &cells {
                rows.push(ReportRow {
                    epoch,
                    boundary_index: c.boundary.index,
                    boundary_name: c.boundary.layer.clone(),
                    side: c.boundary.side.as_str().into(),
                    split,
                    n_points: c.estimate.n_points,
                    subset_count: c.estimate.subset_count,
                    complexity: c.estimate.value,
                    dropped_tail: c.estimate.dropped_tail,
                });
            }
            if let Some(e) = self.end_to_end_for(epoch, split) {
                rows.push(ReportRow {
                    epoch,
                    boundary_index: cells.last().map_or(0, |c| c.boundary.index + 1),
                    boundary_name: END2END_NAME.into(),
                    side: String::new(),
                    split,
                    n_points: e.n_points,
                    subset_count: 1,
                    complexity: e.error,
                    dropped_tail: 0,
                });
            }
        }
        rows
    }

    /// One series per (split, epoch), directly plottable as complexity
    /// against boundary position.
    pub fn plot_series(&self) -> Vec<PlotSeries> {
        let mut pairs = self.epoch_splits();
        pairs.sort_by_key(|&(epoch, split)| (split, epoch));
        pairs
            .into_iter()
            .map(|(epoch, split)| PlotSeries {
                split,
                epoch,
                points: self
                    .cells
                    .iter()
                    .filter(|c| c.epoch == epoch && c.split == split)
                    .map(|c| (c.boundary.index, c.estimate.value))
                    .collect(),
                end_to_end: self.end_to_end_for(epoch, split).map(|e| e.error),
            })
            .collect()
    }
}

pub fn write_csv<W: std::io::Write>(report: &ProfileReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in report.rows() {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Format(format!("csv: {e}")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

pub fn emit_report(report: &ProfileReport, format: ReportFormat, path: &Path) -> Result<()> {
    let bytes = match format {
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            write_csv(report, &mut buf)?;
            buf
        }
        ReportFormat::Json => serde_json::to_vec_pretty(report).expect("report serializes"),
        ReportFormat::PlotSeries => serde_json::to_vec_pretty(&report.plot_series()).expect("series serialize"),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(text.as_slice())
        .deserialize()
        .collect::<std::result::Result<Vec<ReportRow>, _>>()
        .map_err(csv_err)
}

pub fn read_report_json(path: &Path) -> Result<ProfileReport> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&text).map_err(|e| Error::Format(format!("report json: {e}")))
}
