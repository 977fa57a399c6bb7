//! NPY v1.0 reader/writer for the handful of dtypes the profiler exchanges.
//!
//! Only little-endian `<f4`, `<f8`, `<i8` and `|u1` payloads in C order are
//! accepted. The writer reproduces the header layout numpy itself emits
//! (dict key order, trailing `, `, space padding to a 64-byte boundary).

use super::rtd::{decode_payload_le, encode_payload_le};
use super::{checked_numel, DType, Tensor};
use crate::error::{Error, Result};

pub(crate) const MAGIC: &[u8] = b"\x93NUMPY";

fn descr_of(d: DType) -> &'static str {
    match d {
        DType::F32 => "<f4",
        DType::F64 => "<f8",
        DType::U8 => "|u1",
        DType::I64 => "<i8",
    }
}

fn dtype_of(descr: &str) -> Result<DType> {
    match descr {
        "<f4" => Ok(DType::F32),
        "<f8" => Ok(DType::F64),
        "|u1" => Ok(DType::U8),
        "<i8" => Ok(DType::I64),
        other => Err(Error::UnsupportedDtype(format!("NPY descr '{other}'"))),
    }
}

pub fn write_npy(t: &Tensor) -> Vec<u8> {
    let shape = match t.dims() {
        [] => "()".to_string(),
        [d] => format!("({d},)"),
        dims => format!(
            "({})",
            dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        descr_of(t.dtype()),
        shape
    );
    // magic(6) + version(2) + len(2) + header + '\n' is a multiple of 64
    let unpadded = 10 + header.len() + 1;
    header.extend(std::iter::repeat_n(' ', (64 - unpadded % 64) % 64));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + t.numel() * t.dtype().size_of());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    encode_payload_le(t.data(), &mut out);
    out
}

pub fn read_npy(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 10 || !bytes.starts_with(MAGIC) {
        return Err(Error::Format("missing NPY magic".into()));
    }
    if bytes[6..8] != [1, 0] {
        return Err(Error::Format(format!(
            "unsupported NPY version {}.{}",
            bytes[6], bytes[7]
        )));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let header = bytes
        .get(10..10 + header_len)
        .ok_or_else(|| Error::Format("truncated NPY header".into()))?;
    let header = std::str::from_utf8(header).map_err(|_| Error::Format("NPY header is not ASCII".into()))?;
    let dict = parse_header(header)?;
    if dict.fortran_order {
        return Err(Error::Format("Fortran-order NPY arrays are not supported".into()));
    }
    let dtype = dtype_of(&dict.descr)?;
    let payload = &bytes[10 + header_len..];
    let expected = checked_numel(&dict.shape)
        .and_then(|n| n.checked_mul(dtype.size_of()))
        .ok_or_else(|| Error::Format("NPY shape overflows".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "NPY payload has {} bytes, shape {:?} needs {expected}",
            payload.len(),
            dict.shape
        )));
    }
    Tensor::new(dict.shape, decode_payload_le(dtype, payload))
}

#[derive(Debug, PartialEq)]
struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Parses the Python dict literal of an NPY header.
fn parse_header(src: &str) -> Result<HeaderDict> {
    let bad = |msg: &str| Error::Format(format!("NPY header: {msg}"));
    let body = src
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| bad("not a dict literal"))?;

    let (mut descr, mut fortran, mut shape) = (None, None, None);
    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let quote = rest.chars().next().unwrap();
        if quote != '\'' && quote != '"' {
            return Err(bad("expected quoted key"));
        }
        let end = rest[1..].find(quote).ok_or_else(|| bad("unterminated key"))? + 1;
        let key = &rest[1..end];
        rest = rest[end + 1..]
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| bad("expected ':'"))?
            .trim_start();
        match key {
            "descr" => {
                let q = rest.chars().next().ok_or_else(|| bad("missing descr"))?;
                if q != '\'' && q != '"' {
                    return Err(bad("descr must be a string"));
                }
                let e = rest[1..].find(q).ok_or_else(|| bad("unterminated descr"))? + 1;
                descr = Some(rest[1..e].to_string());
                rest = &rest[e + 1..];
            }
            "fortran_order" => {
                if let Some(r) = rest.strip_prefix("True") {
                    fortran = Some(true);
                    rest = r;
                } else if let Some(r) = rest.strip_prefix("False") {
                    fortran = Some(false);
                    rest = r;
                } else {
                    return Err(bad("fortran_order must be True or False"));
                }
            }
            "shape" => {
                let r = rest.strip_prefix('(').ok_or_else(|| bad("shape must be a tuple"))?;
                let e = r.find(')').ok_or_else(|| bad("unterminated shape"))?;
                let dims = r[..e]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim_end_matches('L').parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("non-integer shape entry"))?;
                shape = Some(dims);
                rest = &r[e + 1..];
            }
            other => return Err(bad(&format!("unexpected key '{other}'"))),
        }
        rest = rest.trim_start();
        if let Some(r) = rest.strip_prefix(',') {
            rest = r.trim_start();
        } else if !rest.is_empty() {
            return Err(bad("expected ','"));
        }
    }
    Ok(HeaderDict {
        descr: descr.ok_or_else(|| bad("missing 'descr'"))?,
        fortran_order: fortran.ok_or_else(|| bad("missing 'fortran_order'"))?,
        shape: shape.ok_or_else(|| bad("missing 'shape'"))?,
    })
}
