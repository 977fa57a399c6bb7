//! The RTD tensor dump format.

use super::{checked_numel, DType, Tensor, TensorData};
use crate::error::{Error, Result};

pub(crate) const MAGIC: &[u8] = b"RTD1";

fn dtype_code(d: DType) -> u8 {
    match d {
        DType::F32 => 0,
        DType::F64 => 1,
        DType::U8 => 2,
        DType::I64 => 3,
    }
}

fn dtype_from_code(code: u8) -> Result<DType> {
    match code {
        0 => Ok(DType::F32),
        1 => Ok(DType::F64),
        2 => Ok(DType::U8),
        3 => Ok(DType::I64),
        other => Err(Error::UnsupportedDtype(format!("RTD dtype code {other}"))),
    }
}

pub fn write_rtd(t: &Tensor) -> Vec<u8> {
    let dims = t.dims();
    let mut out = Vec::with_capacity(9 + 8 * dims.len() + t.numel() * t.dtype().size_of());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.push(dtype_code(t.dtype()));
    encode_payload_le(t.data(), &mut out);
    out
}

pub(crate) fn encode_payload_le(data: &TensorData, out: &mut Vec<u8>) {
    match data {
        TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        TensorData::U8(v) => out.extend_from_slice(v),
        TensorData::I64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
}

/// Decodes exactly `numel` little-endian values; `bytes` must have the exact length.
pub(crate) fn decode_payload_le(dtype: DType, bytes: &[u8]) -> TensorData {
    match dtype {
        DType::F32 => TensorData::F32(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        DType::F64 => TensorData::F64(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        DType::U8 => TensorData::U8(bytes.to_vec()),
        DType::I64 => TensorData::I64(
            bytes
                .chunks_exact(8)
                .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated RTD file while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

pub fn read_rtd(bytes: &[u8]) -> Result<Tensor> {
    if bytes.is_empty() {
        return Err(Error::Format("empty file".into()));
    }
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad RTD magic".into()));
    }
    let ndim = u32::from_le_bytes(cur.take(4, "rank")?.try_into().unwrap()) as usize;
    let mut dims = Vec::with_capacity(ndim.min(64));
    for _ in 0..ndim {
        let d = u64::from_le_bytes(cur.take(8, "dims")?.try_into().unwrap());
        dims.push(usize::try_from(d).map_err(|_| Error::Format(format!("dim {d} too large")))?);
    }
    let dtype = dtype_from_code(cur.take(1, "dtype")?[0])?;
    let nbytes = checked_numel(&dims)
        .and_then(|n| n.checked_mul(dtype.size_of()))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    let payload = cur.take(nbytes, "payload")?;
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after RTD payload",
            bytes.len() - cur.pos
        )));
    }
    Tensor::new(dims, decode_payload_le(dtype, payload))
}
