//! Representation-complexity profiling for deep networks.
//!
//! The complexity of a labeled point set is its leave-one-out 1-nearest-neighbor
//! error in the Euclidean metric. This crate measures it at every layer boundary
//! of a LeNet-5 network (or of externally dumped activations), epoch by epoch.
//!
//! - [`tensor_io`]: RTD/NPY tensors, MNIST IDX files, LNW1 weight bundles.
//! - [`knn`]: exact LOO-1NN error, the subset-mean estimator, deterministic subsampling.
//! - [`lenet`]: from-scratch LeNet-5 forward pass with activation capture.
//! - [`profiler`]: experiment orchestration and report emission.

pub mod error;
pub mod knn;
pub mod lenet;
pub mod profiler;
pub mod tensor_io;

pub use error::{Error, Result};
pub use knn::{loo_nn_error, loo_nn_predict, subsample, subset_mean_complexity, ComplexityEstimate};
pub use tensor_io::{LabeledPointSet, Tensor};
