//! Experiment orchestration: per-epoch, per-boundary complexity over the
//! train/test splits, plus end-to-end error, assembled into a report.
//!
//! Run directory layout:
//!
//! ```text
//! run/
//!   epoch_001/                 LNW1 bundle (manifest.json, weights.bin)
//!   epoch_001/traces/<split>/  or pre-dumped boundary tensors
//!     00_conv1_entry.rtd       one [N, ...] tensor per boundary
//!     labels.rtd               optional; else run/labels_<split>.rtd
//!     predictions.rtd          optional; gives end-to-end error for traces
//!   labels_<split>.rtd
//! ```

mod config;
mod measure;
mod report;
mod run;
pub mod traces;

pub use config::{DatasetPaths, Reduction, RunConfig, Source, SubsampleSpec};
pub use measure::{measure_boundary, measure_point_set};
pub use report::{
    emit_report, read_report_csv, read_report_json, write_csv, Cell, EndToEnd, PlotSeries, ProfileReport, ReportFormat,
    ReportRow, Timing, END2END_NAME,
};
pub use run::{epoch_dir_name, load_image_set, profile_run, reduce_dataset};
