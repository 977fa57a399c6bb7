use serde::{Deserialize, Serialize};

use super::{flatten, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Parameter(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointSetMeta {
    pub boundary: Option<String>,
    pub split: Option<Split>,
    pub epoch: Option<u32>,
}

/// N points of dimension D with class labels in `[0, num_classes)`.
///
/// Points are stored row-major as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointSet {
    points: Vec<f32>,
    dim: usize,
    labels: Vec<u32>,
    num_classes: u32,
    pub meta: PointSetMeta,
}

impl LabeledPointSet {
    pub fn new(points: Vec<f32>, dim: usize, labels: Vec<u32>, num_classes: u32) -> Result<Self> {
        if points.len() != labels.len() * dim {
            return Err(Error::Validation(format!(
                "{} values cannot form {} points of dimension {dim}",
                points.len(),
                labels.len()
            )));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::Validation(format!(
                "label {l} at index {i} is not below num_classes={num_classes}"
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("point set contains non-finite values".into()));
        }
        Ok(LabeledPointSet {
            points,
            dim,
            labels,
            num_classes,
            meta: PointSetMeta::default(),
        })
    }

    /// Like [`LabeledPointSet::new`], taking the class count from the largest label.
    pub fn with_inferred_classes(points: Vec<f32>, dim: usize, labels: Vec<u32>) -> Result<Self> {
        let classes = labels.iter().max().map_or(1, |&m| m + 1);
        Self::new(points, dim, labels, classes)
    }

    /// Flattens each sample of a batch tensor `[N, ...]` into one point.
    pub fn from_batch(batch: &Tensor, labels: Vec<u32>, num_classes: u32) -> Result<Self> {
        let Some((&n, rest)) = batch.dims().split_first() else {
            return Err(Error::Dimension("batch tensor must have a leading sample axis".into()));
        };
        if n != labels.len() {
            return Err(Error::Validation(format!(
                "batch has {n} samples but {} labels",
                labels.len()
            )));
        }
        Self::new(flatten(batch), rest.iter().product(), labels, num_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn points(&self) -> &[f32] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f32] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Keeps the given indices in the given order.
    pub fn select(&self, indices: &[usize]) -> LabeledPointSet {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            points.extend_from_slice(self.point(i));
            labels.push(self.labels[i]);
        }
        LabeledPointSet {
            points,
            dim: self.dim,
            labels,
            num_classes: self.num_classes,
            meta: self.meta.clone(),
        }
    }

    /// Contiguous block `[start, start + len)` in stored order.
    pub fn slice(&self, start: usize, len: usize) -> LabeledPointSet {
        LabeledPointSet {
            points: self.points[start * self.dim..(start + len) * self.dim].to_vec(),
            dim: self.dim,
            labels: self.labels[start..start + len].to_vec(),
            num_classes: self.num_classes,
            meta: self.meta.clone(),
        }
    }

    /// The points as a `[N, D]` tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_f32(vec![self.len(), self.dim], self.points.clone()).expect("point set is internally consistent")
    }
}
