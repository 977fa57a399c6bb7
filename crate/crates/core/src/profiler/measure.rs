use super::config::SubsampleSpec;
use crate::error::{Error, Result};
use crate::knn::{subsample, subset_mean_complexity, ComplexityEstimate};
use crate::tensor_io::{flatten, LabeledPointSet, Tensor};

/// Complexity of one boundary's point set, optionally subsampled first.
pub fn measure_point_set(
    set: &LabeledPointSet,
    subset_size: usize,
    sample: Option<SubsampleSpec>,
) -> Result<ComplexityEstimate> {
    match sample {
        Some(s) => subset_mean_complexity(&subsample(set, s.n, s.seed)?, subset_size),
        None => subset_mean_complexity(set, subset_size),
    }
}

/// Complexity of a boundary captured as one or more `[N_b, ...]` batches.
///
/// Every sample must have the same dims; batches are concatenated in order
/// and each sample is flattened into one point.
pub fn measure_boundary(
    batches: &[Tensor],
    labels: &[u32],
    num_classes: u32,
    subset_size: usize,
    sample: Option<SubsampleSpec>,
) -> Result<ComplexityEstimate> {
    let Some(first) = batches.first() else {
        return Err(Error::Validation("no trace batches for boundary".into()));
    };
    let sample_dims = first.dims().get(1..).unwrap_or_default();
    let mut points = Vec::new();
    for (b, t) in batches.iter().enumerate() {
        if t.dims().is_empty() || &t.dims()[1..] != sample_dims {
            return Err(Error::Validation(format!(
                "batch {b} has sample dims {:?}, expected {sample_dims:?}",
                t.dims().get(1..).unwrap_or_default()
            )));
        }
        points.extend(flatten(t));
    }
    let n: usize = batches.iter().map(|t| t.dims()[0]).sum();
    if n != labels.len() {
        return Err(Error::Validation(format!("{n} samples but {} labels", labels.len())));
    }
    let set = LabeledPointSet::new(points, sample_dims.iter().product(), labels.to_vec(), num_classes)?;
    measure_point_set(&set, subset_size, sample)
}
