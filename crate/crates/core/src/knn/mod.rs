//! Leave-one-out 1-nearest-neighbor error as a data complexity measure.
//!
//! Each point is classified by the label of its nearest *other* point under
//! squared Euclidean distance (ties to the lowest index). The error rate over
//! all points is the complexity of the set in that representation. Large sets
//! are split into equal contiguous subsets whose errors are averaged, so that
//! sets of different sizes are compared at the same density.

mod distance;
mod engine;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use distance::{squared_distance, squared_distance_unchecked};

use crate::error::{Error, Result};
use crate::tensor_io::LabeledPointSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    /// Mean of `per_subset`.
    pub value: f64,
    /// Points in the measured set, including any dropped tail.
    pub n_points: usize,
    pub subset_count: usize,
    pub subset_size: usize,
    pub per_subset: Vec<f64>,
    /// Points left over after partitioning into `subset_count` blocks.
    pub dropped_tail: usize,
}

fn require_pair(set: &LabeledPointSet) -> Result<()> {
    if set.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: set.len(),
        });
    }
    Ok(())
}

/// Label predicted for point `i` by its nearest other point.
///
/// Straight scan on the reference distance path.
pub fn loo_nn_predict(set: &LabeledPointSet, i: usize) -> Result<u32> {
    require_pair(set)?;
    if i >= set.len() {
        return Err(Error::Parameter(format!(
            "index {i} out of range for {} points",
            set.len()
        )));
    }
    let query = set.point(i);
    let mut best = (f64::INFINITY, usize::MAX);
    for j in (0..set.len()).filter(|&j| j != i) {
        let d = squared_distance_unchecked(query, set.point(j));
        if d < best.0 {
            best = (d, j);
        }
    }
    Ok(set.labels()[best.1])
}

/// Index of every point's nearest other point.
pub fn loo_nn_neighbors(set: &LabeledPointSet) -> Result<Vec<usize>> {
    require_pair(set)?;
    Ok(engine::nearest_other_indices(set))
}

/// Leave-one-out predicted label of every point.
pub fn loo_nn_predictions(set: &LabeledPointSet) -> Result<Vec<u32>> {
    Ok(loo_nn_neighbors(set)?.into_iter().map(|j| set.labels()[j]).collect())
}

/// Fraction of points whose nearest other point carries a different label.
pub fn loo_nn_error(set: &LabeledPointSet) -> Result<ComplexityEstimate> {
    let value = single_error(set)?;
    Ok(ComplexityEstimate {
        value,
        n_points: set.len(),
        subset_count: 1,
        subset_size: set.len(),
        per_subset: vec![value],
        dropped_tail: 0,
    })
}

fn single_error(set: &LabeledPointSet) -> Result<f64> {
    let predicted = loo_nn_predictions(set)?;
    let wrong = predicted.iter().zip(set.labels()).filter(|(p, l)| p != l).count();
    Ok(wrong as f64 / set.len() as f64)
}

/// Mean LOO error over `floor(N / m)` contiguous subsets of size `m`.
///
/// The remainder is dropped and reported in `dropped_tail`. When `N <= m`
/// this is [`loo_nn_error`] on the whole set.
pub fn subset_mean_complexity(set: &LabeledPointSet, subset_size: usize) -> Result<ComplexityEstimate> {
    if subset_size < 2 {
        return Err(Error::Parameter(format!(
            "subset size must be at least 2, got {subset_size}"
        )));
    }
    let n = set.len();
    if n <= subset_size {
        return loo_nn_error(set);
    }
    let count = n / subset_size;
    let per_subset = (0..count)
        .map(|k| single_error(&set.slice(k * subset_size, subset_size)))
        .collect::<Result<Vec<_>>>()?;
    let value = per_subset.iter().sum::<f64>() / count as f64;
    Ok(ComplexityEstimate {
        value,
        n_points: n,
        subset_count: count,
        subset_size,
        per_subset,
        dropped_tail: n - count * subset_size,
    })
}

/// Sorted indices of a uniform `n`-of-`len` sample without replacement.
///
/// The generator is ChaCha8 seeded with `seed` through
/// `SeedableRng::seed_from_u64`; indices come from `rand::seq::index::sample`.
pub fn subsample_indices(len: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > len {
        return Err(Error::Parameter(format!("cannot draw {n} of {len} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, len, n).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Deterministic uniform subsample preserving stored order.
pub fn subsample(set: &LabeledPointSet, n: usize, seed: u64) -> Result<LabeledPointSet> {
    Ok(set.select(&subsample_indices(set.len(), n, seed)?))
}
