//! LeNet-5 inference with activation capture at every layer boundary.

mod dropout;
pub mod kernels;
mod network;

pub use dropout::{draw_mask, dropout_apply, dropout_with_mask, DROPOUT_P};
pub use kernels::{avgpool2, classify, conv2d_valid, linear, tanh_map, tanh_scalar};
pub use network::{
    boundaries, end_to_end_error, forward, forward_batch, layers, ActivationTrace, BatchCapture, BoundaryId,
    CaptureMode, Layer, LayerKind, Side, INPUT_DIMS,
};
