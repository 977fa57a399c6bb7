//! Tensors, labeled point sets, and the on-disk formats they travel in.
//!
//! Supported files:
//!
//! - **RTD** (canonical, read/write): `"RTD1"`, `u32` LE rank, rank × `u64` LE dims,
//!   `u8` dtype code (0=f32, 1=f64, 2=u8, 3=i64), then the row-major LE payload.
//! - **NPY** v1.0, little-endian `<f4`, `<f8`, `<i8`, `|u1`, C order only.
//! - **IDX** (MNIST distribution, big-endian), unsigned byte payloads only.
//! - **LNW1** weight bundles, see [`weights`].

mod idx;
mod npy;
mod points;
mod rtd;
pub mod weights;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub use idx::{load_mnist_idx, read_idx, write_idx, MNIST_PADDED_SIDE};
pub use npy::{read_npy, write_npy};
pub use points::{LabeledPointSet, PointSetMeta, Split};
pub use rtd::{read_rtd, write_rtd};
pub use weights::{load_weights, save_weights, LeNetWeights, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    F32,
    F64,
    U8,
    I64,
}

impl DType {
    pub fn size_of(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
            DType::U8 => 1,
            DType::I64 => 8,
        }
    }
}

/// Flat row-major storage of a tensor's values.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
    I64(Vec<i64>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U8(v) => v.len(),
            TensorData::I64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
            TensorData::U8(_) => DType::U8,
            TensorData::I64(_) => DType::I64,
        }
    }
}

/// A dense tensor. `product(dims) == data.len()` and floating values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

pub(crate) fn checked_numel(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        let numel = checked_numel(&dims).ok_or_else(|| Error::Validation(format!("dims {dims:?} overflow")))?;
        if numel != data.len() {
            return Err(Error::Validation(format!(
                "dims {dims:?} require {numel} values, got {}",
                data.len()
            )));
        }
        let finite = match &data {
            TensorData::F32(v) => v.iter().all(|x| x.is_finite()),
            TensorData::F64(v) => v.iter().all(|x| x.is_finite()),
            _ => true,
        };
        if !finite {
            return Err(Error::Validation("tensor contains NaN or infinite values".into()));
        }
        Ok(Tensor { dims, data })
    }

    pub fn from_f32(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        Self::new(dims, TensorData::F32(data))
    }

    pub fn from_f64(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::new(dims, TensorData::F64(data))
    }

    pub fn from_i64(dims: Vec<usize>, data: Vec<i64>) -> Result<Self> {
        Self::new(dims, TensorData::I64(data))
    }

    pub fn from_u8(dims: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        Self::new(dims, TensorData::U8(data))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            TensorData::F32(v) => Some(v),
            _ => None,
        }
    }

    /// Values converted to `f32`. Integer values and `f64` are cast.
    pub fn to_f32_vec(&self) -> Vec<f32> {
        match &self.data {
            TensorData::F32(v) => v.clone(),
            TensorData::F64(v) => v.iter().map(|&x| x as f32).collect(),
            TensorData::U8(v) => v.iter().map(|&x| x as f32).collect(),
            TensorData::I64(v) => v.iter().map(|&x| x as f32).collect(),
        }
    }

    /// Integer view of the values; floating tensors are rejected.
    pub fn to_i64_vec(&self) -> Result<Vec<i64>> {
        match &self.data {
            TensorData::I64(v) => Ok(v.clone()),
            TensorData::U8(v) => Ok(v.iter().map(|&x| x as i64).collect()),
            other => Err(Error::UnsupportedDtype(format!(
                "expected an integer tensor, got {:?}",
                other.dtype()
            ))),
        }
    }

    /// Row-major flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> Option<usize> {
        if index.len() != self.dims.len() {
            return None;
        }
        let mut off = 0usize;
        for (&i, &d) in index.iter().zip(&self.dims) {
            if i >= d {
                return None;
            }
            off = off * d + i;
        }
        Some(off)
    }

    /// Inverse of [`Tensor::offset`].
    pub fn unravel(&self, mut offset: usize) -> Option<Vec<usize>> {
        if offset >= self.numel() {
            return None;
        }
        let mut index = vec![0; self.dims.len()];
        for (slot, &d) in index.iter_mut().zip(&self.dims).rev() {
            *slot = offset % d;
            offset /= d;
        }
        Some(index)
    }

    /// Keeps the listed rows of axis 0, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Tensor> {
        let Some((&n, rest)) = self.dims.split_first() else {
            return Err(Error::Dimension("cannot select rows of a scalar tensor".into()));
        };
        let row_len: usize = rest.iter().product();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::Parameter(format!("row {bad} out of range for {n} rows")));
        }
        fn pick<T: Copy>(v: &[T], rows: &[usize], row_len: usize) -> Vec<T> {
            let mut out = Vec::with_capacity(rows.len() * row_len);
            for &r in rows {
                out.extend_from_slice(&v[r * row_len..(r + 1) * row_len]);
            }
            out
        }
        let data = match &self.data {
            TensorData::F32(v) => TensorData::F32(pick(v, rows, row_len)),
            TensorData::F64(v) => TensorData::F64(pick(v, rows, row_len)),
            TensorData::U8(v) => TensorData::U8(pick(v, rows, row_len)),
            TensorData::I64(v) => TensorData::I64(pick(v, rows, row_len)),
        };
        let mut dims = self.dims.clone();
        dims[0] = rows.len();
        Tensor::new(dims, data)
    }
}

/// Row-major linearization of one sample's activation.
pub fn flatten(t: &Tensor) -> Vec<f32> {
    t.to_f32_vec()
}

/// On-disk tensor container, detected from the leading bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorFormat {
    Rtd,
    Npy,
    Idx,
}

impl TensorFormat {
    pub fn detect(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(rtd::MAGIC) {
            Ok(TensorFormat::Rtd)
        } else if bytes.starts_with(npy::MAGIC) {
            Ok(TensorFormat::Npy)
        } else if bytes.len() >= 4 && bytes[0] == 0 && bytes[1] == 0 && bytes[2] == 0x08 {
            Ok(TensorFormat::Idx)
        } else if bytes.is_empty() {
            Err(Error::Format("empty file".into()))
        } else {
            Err(Error::Format("unrecognized magic bytes".into()))
        }
    }
}

/// Loads an RTD, NPY or IDX file, detected by magic.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    Ok(load_tensor_with_format(path)?.0)
}

pub fn load_tensor_with_format(path: impl AsRef<Path>) -> Result<(Tensor, TensorFormat)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = TensorFormat::detect(&bytes)?;
    let t = match format {
        TensorFormat::Rtd => read_rtd(&bytes)?,
        TensorFormat::Npy => read_npy(&bytes)?,
        TensorFormat::Idx => read_idx(&bytes)?,
    };
    Ok((t, format))
}

/// Writes `t` as RTD.
pub fn save_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    save_tensor_as(t, path, TensorFormat::Rtd)
}

pub fn save_tensor_as(t: &Tensor, path: impl AsRef<Path>, format: TensorFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        TensorFormat::Rtd => write_rtd(t),
        TensorFormat::Npy => write_npy(t),
        TensorFormat::Idx => write_idx(t)?,
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a label vector (any integer tensor) and narrows it to `u32`.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<u32>> {
    labels_from_tensor(&load_tensor(path)?)
}

pub fn labels_from_tensor(t: &Tensor) -> Result<Vec<u32>> {
    if t.dims().len() != 1 {
        return Err(Error::Validation(format!(
            "labels must be rank 1, got dims {:?}",
            t.dims()
        )));
    }
    t.to_i64_vec()?
        .into_iter()
        .enumerate()
        .map(|(i, v)| u32::try_from(v).map_err(|_| Error::Validation(format!("label {v} at index {i} out of range"))))
        .collect()
}

pub fn labels_to_tensor(labels: &[u32]) -> Tensor {
    Tensor::from_i64(vec![labels.len()], labels.iter().map(|&l| l as i64).collect())
        .expect("rank-1 label tensor is always consistent")
}

pub fn save_labels(labels: &[u32], path: impl AsRef<Path>) -> Result<()> {
    save_tensor(&labels_to_tensor(labels), path)
}
