//! IDX files as distributed with MNIST.

use std::fs;
use std::path::Path;

use super::points::LabeledPointSet;
use super::{checked_numel, labels_from_tensor, Tensor, TensorData};
use crate::error::{Error, Result};

pub const MNIST_SIDE: usize = 28;
pub const MNIST_PADDED_SIDE: usize = 32;
const PAD: usize = (MNIST_PADDED_SIDE - MNIST_SIDE) / 2;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Reads an unsigned-byte IDX file into a `u8` tensor.
pub fn read_idx(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Format("bad IDX magic".into()));
    }
    if bytes[2] != 0x08 {
        return Err(Error::UnsupportedDtype(format!("IDX type code 0x{:02x}", bytes[2])));
    }
    let ndim = bytes[3] as usize;
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::Format("truncated IDX header".into()));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let n = checked_numel(&dims).ok_or_else(|| Error::Format("IDX dims overflow".into()))?;
    if bytes.len() - header != n {
        return Err(Error::Format(format!(
            "IDX payload has {} bytes, dims {dims:?} need {n}",
            bytes.len() - header
        )));
    }
    Tensor::from_u8(dims, bytes[header..].to_vec())
}

pub fn write_idx(t: &Tensor) -> Result<Vec<u8>> {
    let TensorData::U8(data) = t.data() else {
        return Err(Error::UnsupportedDtype(format!(
            "IDX output supports u8 only, got {:?}",
            t.dtype()
        )));
    };
    let ndim = u8::try_from(t.dims().len()).map_err(|_| Error::Dimension("too many dims for IDX".into()))?;
    let mut out = vec![0, 0, 0x08, ndim];
    for &d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::Dimension(format!("dim {d} too large")))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(data);
    Ok(out)
}

fn read_with_magic(path: &Path, magic: u32) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 4 {
        return Err(Error::Format(format!("{}: too short for IDX", path.display())));
    }
    let found = u32::from_be_bytes(bytes[..4].try_into().unwrap());
    if found != magic {
        return Err(Error::Format(format!(
            "{}: IDX magic 0x{found:08x}, expected 0x{magic:08x}",
            path.display()
        )));
    }
    read_idx(&bytes)
}

/// Loads MNIST images and labels.
///
/// Each 28×28 image is scaled to `[0, 1]` by dividing by 255 and zero-padded by
/// two pixels on every side to 1×32×32. Points are the flattened 1024-vectors.
pub fn load_mnist_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<LabeledPointSet> {
    let images = read_with_magic(images.as_ref(), IMAGES_MAGIC)?;
    let labels = labels_from_tensor(&read_with_magic(labels.as_ref(), LABELS_MAGIC)?)?;
    let &[n, rows, cols] = images.dims() else {
        return Err(Error::Validation(format!(
            "MNIST images must be rank 3, got {:?}",
            images.dims()
        )));
    };
    if rows != MNIST_SIDE || cols != MNIST_SIDE {
        return Err(Error::Validation(format!(
            "MNIST images must be 28x28, got {rows}x{cols}"
        )));
    }
    if n != labels.len() {
        return Err(Error::Validation(format!("{n} images but {} labels", labels.len())));
    }
    let TensorData::U8(pixels) = images.data() else {
        unreachable!("read_idx only yields u8 tensors")
    };
    let points = pad_and_scale(pixels, n);
    LabeledPointSet::new(points, MNIST_PADDED_SIDE * MNIST_PADDED_SIDE, labels, 10)
}

pub(crate) fn pad_and_scale(pixels: &[u8], n: usize) -> Vec<f32> {
    let side = MNIST_PADDED_SIDE;
    let mut out = vec![0f32; n * side * side];
    for (img, dst) in pixels
        .chunks_exact(MNIST_SIDE * MNIST_SIDE)
        .zip(out.chunks_exact_mut(side * side))
    {
        for r in 0..MNIST_SIDE {
            for c in 0..MNIST_SIDE {
                dst[(r + PAD) * side + c + PAD] = img[r * MNIST_SIDE + c] as f32 / 255.0;
            }
        }
    }
    out
}
