//! Boundary trace directories: one `[N, ...]` tensor file per boundary, named
//! `<index>_<layer>_<side>.rtd` (NPY dumps with the same stem are also read),
//! alongside `labels.rtd` and, from inference runs, `predictions.rtd`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lenet::BoundaryId;
use crate::tensor_io::{save_labels, save_tensor, Tensor};

pub const LABELS_STEM: &str = "labels";
pub const PREDICTIONS_STEM: &str = "predictions";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceFile {
    pub boundary: BoundaryId,
    pub path: PathBuf,
}

/// Parses `<index>_<layer>_<side>`; the layer name may itself contain `_`.
pub fn parse_stem(stem: &str) -> Option<BoundaryId> {
    let (index, rest) = stem.split_once('_')?;
    let (layer, side) = rest.rsplit_once('_')?;
    if layer.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some(BoundaryId {
        index: index.parse().ok()?,
        layer: layer.to_string(),
        side: side.parse().ok()?,
    })
}

pub fn write_trace_dir(dir: &Path, captured: &[(BoundaryId, Tensor)], labels: Option<&[u32]>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (id, t) in captured {
        save_tensor(t, dir.join(format!("{}.rtd", id.file_stem())))?;
    }
    if let Some(labels) = labels {
        save_labels(labels, dir.join(format!("{LABELS_STEM}.rtd")))?;
    }
    Ok(())
}

/// Boundary files of a trace directory in network order.
pub fn scan_trace_dir(dir: &Path) -> Result<Vec<TraceFile>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str());
        if !matches!(ext, Some("rtd") | Some("npy")) {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        if stem == LABELS_STEM || stem == PREDICTIONS_STEM {
            continue;
        }
        let boundary = parse_stem(stem).ok_or_else(|| {
            Error::Validation(format!(
                "{}: trace files must be named <index>_<layer>_<side>",
                path.display()
            ))
        })?;
        files.push(TraceFile { boundary, path });
    }
    files.sort_by(|a, b| a.boundary.cmp(&b.boundary));
    if let Some(w) = files.windows(2).find(|w| w[0].boundary.index == w[1].boundary.index) {
        return Err(Error::Validation(format!(
            "boundary index {} appears twice: {} and {}",
            w[0].boundary.index,
            w[0].path.display(),
            w[1].path.display()
        )));
    }
    if files.is_empty() {
        return Err(Error::Validation(format!("{}: no boundary trace files", dir.display())));
    }
    Ok(files)
}

fn find_stem(dir: &Path, stem: &str) -> Option<PathBuf> {
    ["rtd", "npy"]
        .iter()
        .map(|ext| dir.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
}

/// `labels.rtd`/`labels.npy` in the directory, if present.
pub fn find_labels(dir: &Path) -> Option<PathBuf> {
    find_stem(dir, LABELS_STEM)
}

/// `predictions.rtd`/`predictions.npy` in the directory, if present.
pub fn find_predictions(dir: &Path) -> Option<PathBuf> {
    find_stem(dir, PREDICTIONS_STEM)
}
