//! The `FTEN` container.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "FTEN"
//! 4       1         version (1)
//! 5       1         dtype: 1 = f32 IEEE-754, 2 = u8
//! 6       1         ndims (1..=4)
//! 7       4*ndims   dims, u32 little-endian, outermost first
//! ..      payload   product(dims) elements, little-endian
//! ```
//!
//! Nothing follows the payload; trailing bytes are a format error.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;

pub const MAGIC: [u8; 4] = *b"FTEN";
pub const VERSION: u8 = 1;
const MAX_DIMS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F32,
    U8,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::F32 => 1,
            DType::U8 => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(DType::F32),
            2 => Some(DType::U8),
            _ => None,
        }
    }

    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }
}

/// Dimensions plus values; `u8` payloads are held as reals in [0, 255].
#[derive(Clone, Debug, PartialEq)]
pub struct RawTensor {
    pub dtype: DType,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

impl RawTensor {
    pub fn f32(dims: Vec<usize>, values: Vec<f32>) -> Self {
        Self {
            dtype: DType::F32,
            dims,
            values,
        }
    }

    pub fn u8(dims: Vec<usize>, codes: &[u8]) -> Self {
        Self {
            dtype: DType::U8,
            dims,
            values: codes.iter().map(|&c| c as f32).collect(),
        }
    }

    /// Reads the dims as (C, H, W); a 2-D tensor is one channel.
    pub fn chw(&self) -> Result<(usize, usize, usize)> {
        match self.dims.as_slice() {
            [h, w] => Ok((1, *h, *w)),
            [c, h, w] => Ok((*c, *h, *w)),
            other => Err(Error::domain(format!(
                "expected a 2-D or 3-D tensor, got dims {other:?}"
            ))),
        }
    }
}

pub fn encode(t: &RawTensor) -> Result<Vec<u8>> {
    if t.dims.is_empty() || t.dims.len() > MAX_DIMS {
        return Err(Error::domain(format!(
            "{} dimensions; 1 to {MAX_DIMS} supported",
            t.dims.len()
        )));
    }
    if t.dims.contains(&0) {
        return Err(Error::domain(format!("zero-size dimension in {:?}", t.dims)));
    }
    if t.dims.iter().any(|&d| d > u32::MAX as usize) {
        return Err(Error::domain("dimension exceeds u32"));
    }
    let count: usize = t.dims.iter().product();
    if count != t.values.len() {
        return Err(Error::domain(format!(
            "dims {:?} need {count} values, got {}",
            t.dims,
            t.values.len()
        )));
    }
    if let Some(i) = t.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite value at index {i}")));
    }

    let mut out = Vec::with_capacity(7 + 4 * t.dims.len() + count * t.dtype.width());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(t.dtype.code());
    out.push(t.dims.len() as u8);
    for &d in &t.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match t.dtype {
        DType::F32 => {
            for v in &t.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        DType::U8 => {
            for (i, &v) in t.values.iter().enumerate() {
                if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
                    return Err(Error::domain(format!(
                        "value {v} at index {i} is not a u8 code"
                    )));
                }
                out.push(v as u8);
            }
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<RawTensor> {
    let take = |at: usize, n: usize| -> Result<&[u8]> {
        bytes
            .get(at..at + n)
            .ok_or_else(|| Error::format(at as u64, format!("truncated: need {n} bytes")))
    };
    if take(0, 4)? != MAGIC {
        return Err(Error::format(0, "bad magic, expected \"FTEN\""));
    }
    let version = take(4, 1)?[0];
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let code = take(5, 1)?[0];
    let dtype = DType::from_code(code)
        .ok_or_else(|| Error::format(5, format!("unknown dtype code {code}")))?;
    let ndims = take(6, 1)?[0] as usize;
    if ndims == 0 || ndims > MAX_DIMS {
        return Err(Error::format(6, format!("bad dimension count {ndims}")));
    }
    let mut dims = Vec::with_capacity(ndims);
    for k in 0..ndims {
        let at = 7 + 4 * k;
        let b = take(at, 4)?;
        let d = u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize;
        if d == 0 {
            return Err(Error::format(at as u64, "zero-size dimension"));
        }
        dims.push(d);
    }
    let start = 7 + 4 * ndims;
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format(7, "element count overflows"))?;
    let need = count
        .checked_mul(dtype.width())
        .ok_or_else(|| Error::format(7, "payload size overflows"))?;
    let available = bytes.len() - start;
    if available < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!(
                "truncated payload: dims {dims:?} need {need} bytes, found {available}"
            ),
        ));
    }
    if available > need {
        return Err(Error::format(
            (start + need) as u64,
            format!("{} trailing bytes after payload", available - need),
        ));
    }
    let payload = &bytes[start..];
    let values = match dtype {
        DType::F32 => {
            let mut values = Vec::with_capacity(count);
            for (i, c) in payload.chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                if !v.is_finite() {
                    return Err(Error::format(
                        (start + 4 * i) as u64,
                        "non-finite float in payload",
                    ));
                }
                values.push(v);
            }
            values
        }
        DType::U8 => payload.iter().map(|&b| b as f32).collect(),
    };
    Ok(RawTensor {
        dtype,
        dims,
        values,
    })
}

pub fn write_tensor(t: &RawTensor, path: &Path) -> Result<()> {
    let bytes = encode(t)?;
    fsutil::write_atomic(path, &bytes)
}

pub fn read_tensor(path: &Path) -> Result<RawTensor> {
    decode(&fsutil::read_all(path)?)
}
