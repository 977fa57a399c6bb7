use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;

use super::config::{check_reduction, RunConfig, Source};
use super::measure::{measure_boundary, measure_point_set};
use super::report::{Cell, EndToEnd, ProfileReport, Timing};
use super::traces::{find_labels, find_predictions, scan_trace_dir};
use crate::error::{Error, Result};
use crate::lenet::{end_to_end_error, forward_batch, layers, CaptureMode, INPUT_DIMS};
use crate::tensor_io::{
    load_labels, load_mnist_idx, load_tensor, load_weights, weights::MANIFEST_FILE, LabeledPointSet, LeNetWeights,
    Split, TensorFormat,
};

pub fn epoch_dir_name(epoch: u32) -> String {
    format!("epoch_{epoch:03}")
}

/// Keeps indices `offset, offset + stride, ...` in their original order.
pub fn reduce_dataset(set: &LabeledPointSet, stride: usize, offset: usize) -> Result<LabeledPointSet> {
    check_reduction(stride, offset)?;
    let keep: Vec<usize> = (offset..set.len()).step_by(stride).collect();
    Ok(set.select(&keep))
}

/// Loads 1×32×32 images: an MNIST IDX pair, or an RTD/NPY image tensor
/// `[N, 1, 32, 32]` (or `[N, 1024]`) with an integer label tensor.
pub fn load_image_set(images: &Path, labels: &Path) -> Result<LabeledPointSet> {
    let head = fs::read(images).map_err(|e| Error::io(images, e))?;
    if TensorFormat::detect(&head)? == TensorFormat::Idx {
        return load_mnist_idx(images, labels);
    }
    drop(head);
    let t = load_tensor(images)?;
    let per_sample: usize = t.dims().iter().skip(1).product();
    if t.dims().is_empty() || per_sample != INPUT_DIMS.iter().product::<usize>() {
        return Err(Error::Dimension(format!(
            "{}: expected [N, 1, 32, 32] images, got {:?}",
            images.display(),
            t.dims()
        )));
    }
    let labels = load_labels(labels)?;
    LabeledPointSet::from_batch(&t, labels.clone(), labels.iter().max().map_or(10, |&m| (m + 1).max(10)))
}

fn missing_epoch_error(run_dir: &Path, epoch: u32) -> Error {
    let mut found: Vec<String> = fs::read_dir(run_dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .filter(|e| e.path().is_dir())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default();
    found.sort();
    Error::Validation(format!(
        "{} not found in {}; found: [{}]",
        epoch_dir_name(epoch),
        run_dir.display(),
        found.join(", ")
    ))
}

fn find_split_labels(run_dir: &Path, traces: &Path, split: Split) -> Result<Vec<u32>> {
    let path = find_labels(traces)
        .or_else(|| {
            ["rtd", "npy"]
                .iter()
                .map(|ext| run_dir.join(format!("labels_{}.{ext}", split.as_str())))
                .find(|p| p.is_file())
        })
        .ok_or_else(|| {
            Error::Validation(format!(
                "no labels for split '{}' in {} or {}",
                split.as_str(),
                traces.display(),
                run_dir.display()
            ))
        })?;
    load_labels(path)
}

fn reduction_rows(cfg: &RunConfig, split: Split, n: usize) -> Option<Vec<usize>> {
    let r = cfg.reduction.filter(|_| split == Split::Train)?;
    Some((r.offset..n).step_by(r.stride).collect())
}

/// Groups boundary indices so each group's captured batch fits the budget.
fn capture_groups(per_sample: &[usize], n: usize, budget_bytes: usize) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut used = 0usize;
    for (k, &size) in per_sample.iter().enumerate() {
        let bytes = size.saturating_mul(n).saturating_mul(4);
        match groups.last_mut() {
            Some(g) if used.saturating_add(bytes) <= budget_bytes => {
                g.push(k);
                used += bytes;
            }
            _ => {
                groups.push(vec![k]);
                used = bytes;
            }
        }
    }
    groups
}

struct Splits<'a> {
    cfg: &'a RunConfig,
    loaded: BTreeMap<Split, LabeledPointSet>,
}

impl Splits<'_> {
    fn get(&mut self, split: Split) -> Result<&LabeledPointSet> {
        if !self.loaded.contains_key(&split) {
            let paths = self.cfg.datasets.get(&split).ok_or_else(|| {
                Error::Validation(format!(
                    "config has no dataset for split '{}' needed to forward weight bundles",
                    split.as_str()
                ))
            })?;
            let mut set = load_image_set(&paths.images, &paths.labels)?;
            if let Some(rows) = reduction_rows(self.cfg, split, set.len()) {
                set = set.select(&rows);
            }
            self.loaded.insert(split, set);
        }
        Ok(&self.loaded[&split])
    }
}

fn profile_traces(
    cfg: &RunConfig,
    run_dir: &Path,
    traces: &Path,
    epoch: u32,
    split: Split,
    cells: &mut Vec<Cell>,
) -> Result<Vec<u32>> {
    let files = scan_trace_dir(traces)?;
    let mut labels = find_split_labels(run_dir, traces, split)?;
    let rows = reduction_rows(cfg, split, labels.len());
    if let Some(rows) = &rows {
        labels = rows.iter().map(|&r| labels[r]).collect();
    }
    let classes = labels.iter().max().map_or(1, |&m| m + 1);
    for f in files {
        let mut t = load_tensor(&f.path)?;
        if let Some(rows) = &rows {
            t = t.select_rows(rows)?;
        }
        let estimate =
            measure_boundary(&[t], &labels, classes, cfg.subset_size, cfg.subsample).map_err(|e| match e {
                Error::Validation(m) => Error::Validation(format!("{}: {m}", f.path.display())),
                other => other,
            })?;
        info!("epoch {epoch} {} {}: {:.5}", split.as_str(), f.boundary, estimate.value);
        cells.push(Cell {
            epoch,
            split,
            boundary: f.boundary,
            estimate,
        });
    }
    Ok(labels)
}

fn error_rate(predictions: &[u32], labels: &[u32]) -> f64 {
    let wrong = predictions.iter().zip(labels).filter(|(p, l)| p != l).count();
    wrong as f64 / labels.len() as f64
}

fn load_checked_weights(cfg: &RunConfig, dir: &Path) -> Result<LeNetWeights> {
    let w = load_weights(dir)?;
    if let Some(v) = cfg.variant.filter(|&v| v != w.variant) {
        return Err(Error::Validation(format!(
            "{}: bundle variant '{}' but config expects '{}'",
            dir.display(),
            w.variant.as_str(),
            v.as_str()
        )));
    }
    Ok(w)
}

#[allow(clippy::too_many_arguments)]
fn profile_weights(
    cfg: &RunConfig,
    weights: &LeNetWeights,
    data: &LabeledPointSet,
    epoch: u32,
    split: Split,
    cells: &mut Vec<Cell>,
    end_to_end: &mut Vec<EndToEnd>,
) -> Result<()> {
    let per_sample: Vec<usize> = std::iter::once(INPUT_DIMS.iter().product())
        .chain(layers(weights.variant).iter().map(|l| l.out_dims.iter().product()))
        .collect();
    let groups = capture_groups(&per_sample, data.len(), cfg.memory_budget_mb << 20);
    let mut eval_predictions = None;
    for group in groups {
        let batch = forward_batch(weights, data.points(), cfg.capture_mode, cfg.dropout_seed, &group)?;
        if cfg.capture_mode == CaptureMode::Eval && eval_predictions.is_none() {
            eval_predictions = Some(batch.predictions());
        }
        for (id, t) in batch.captured {
            let set = LabeledPointSet::from_batch(&t, data.labels().to_vec(), data.num_classes())?;
            drop(t);
            let estimate = measure_point_set(&set, cfg.subset_size, cfg.subsample)?;
            info!("epoch {epoch} {} {id}: {:.5}", split.as_str(), estimate.value);
            cells.push(Cell {
                epoch,
                split,
                boundary: id,
                estimate,
            });
        }
    }
    let error = match eval_predictions {
        Some(pred) => error_rate(&pred, data.labels()),
        None => end_to_end_error(weights, data)?,
    };
    info!("epoch {epoch} {} end-to-end error {error:.5}", split.as_str());
    end_to_end.push(EndToEnd {
        epoch,
        split,
        n_points: data.len(),
        error,
    });
    Ok(())
}

/// Measures every configured (epoch, split, boundary) cell of a run directory.
pub fn profile_run(cfg: &RunConfig, run_dir: &Path) -> Result<ProfileReport> {
    cfg.validate()?;
    let epoch_dirs: Vec<PathBuf> = cfg
        .epochs
        .iter()
        .map(|&e| {
            let dir = run_dir.join(epoch_dir_name(e));
            if dir.is_dir() {
                Ok(dir)
            } else {
                Err(missing_epoch_error(run_dir, e))
            }
        })
        .collect::<Result<_>>()?;

    let mut splits = Splits {
        cfg,
        loaded: BTreeMap::new(),
    };
    let mut cells = Vec::new();
    let mut end_to_end = Vec::new();
    let mut timings = Vec::new();

    for (&epoch, dir) in cfg.epochs.iter().zip(&epoch_dirs) {
        let mut weights: Option<LeNetWeights> = None;
        for &split in &cfg.splits {
            let started = Instant::now();
            let traces = dir.join("traces").join(split.as_str());
            let use_traces = match cfg.source {
                Source::Traces => true,
                Source::Weights => false,
                Source::Auto => traces.is_dir() || !dir.join(MANIFEST_FILE).is_file(),
            };
            if use_traces {
                if !traces.is_dir() {
                    return Err(Error::Validation(format!(
                        "{}: neither a weight bundle nor traces/{} found",
                        dir.display(),
                        split.as_str()
                    )));
                }
                let labels = profile_traces(cfg, run_dir, &traces, epoch, split, &mut cells)?;
                // end-to-end error needs predictions, or a bundle plus the split's images
                let error = if let Some(path) = find_predictions(&traces) {
                    let mut pred = load_labels(&path)?;
                    if let Some(rows) = reduction_rows(cfg, split, pred.len()) {
                        pred = rows.iter().map(|&r| pred[r]).collect();
                    }
                    if pred.len() != labels.len() {
                        return Err(Error::Validation(format!(
                            "{}: {} predictions for {} labels",
                            path.display(),
                            pred.len(),
                            labels.len()
                        )));
                    }
                    Some(error_rate(&pred, &labels))
                } else if dir.join(MANIFEST_FILE).is_file() && cfg.datasets.contains_key(&split) {
                    if weights.is_none() {
                        weights = Some(load_checked_weights(cfg, dir)?);
                    }
                    Some(end_to_end_error(weights.as_ref().unwrap(), splits.get(split)?)?)
                } else {
                    None
                };
                if let Some(error) = error {
                    end_to_end.push(EndToEnd {
                        epoch,
                        split,
                        n_points: labels.len(),
                        error,
                    });
                }
            } else {
                if weights.is_none() {
                    weights = Some(load_checked_weights(cfg, dir)?);
                }
                let data = splits.get(split)?;
                let w = weights.as_ref().unwrap();
                profile_weights(cfg, w, data, epoch, split, &mut cells, &mut end_to_end)?;
            }
            timings.push(Timing {
                epoch,
                split,
                seconds: started.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(ProfileReport {
        config: cfg.clone(),
        cells,
        end_to_end,
        timings,
    })
}
