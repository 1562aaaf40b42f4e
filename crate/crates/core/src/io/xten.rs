//! XTEN v1: a minimal little-endian tensor file.
//!
//! ```text
//! "XTEN" | version u8 = 1 | dtype u8 | ndim u8 | pad u8 = 0 | dims: ndim × u64 | payload
//! ```
//! dtype codes: 0 = f32, 1 = i32, 2 = u8. Payload is row-major.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{numel, Array, DType, Tensor};

pub const MAGIC: [u8; 4] = *b"XTEN";
pub const VERSION: u8 = 1;
const HEADER: usize = 8;

fn dtype_code(d: DType) -> Result<u8> {
    match d {
        DType::F32 => Ok(0),
        DType::I32 => Ok(1),
        DType::U8 => Ok(2),
        other => Err(Error::UnsupportedDtype(format!("{other:?} cannot be stored in XTEN"))),
    }
}

pub fn encode_tensor(t: &Tensor) -> Result<Vec<u8>> {
    let code = dtype_code(t.dtype())?;
    let shape = t.shape();
    if shape.is_empty() || shape.len() > u8::MAX as usize {
        return Err(Error::BadHeader(format!("cannot store rank {}", shape.len())));
    }
    let mut out = Vec::with_capacity(HEADER + 8 * shape.len() + numel(shape) * t.dtype().size_of());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[VERSION, code, shape.len() as u8, 0]);
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    match t {
        Tensor::F32(a) => a.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        Tensor::I32(a) => a.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        Tensor::U8(a) => out.extend_from_slice(a.data()),
        Tensor::F64(_) => unreachable!("rejected above"),
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < HEADER {
        return Err(Error::BadHeader(format!("{} bytes is shorter than the header", bytes.len())));
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("length checked");
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    let dtype = match bytes[5] {
        0 => DType::F32,
        1 => DType::I32,
        2 => DType::U8,
        c => return Err(Error::UnsupportedDtype(format!("dtype code {c}"))),
    };
    let ndim = bytes[6] as usize;
    if ndim == 0 {
        return Err(Error::BadHeader("rank 0".into()));
    }
    if bytes[7] != 0 {
        return Err(Error::BadHeader(format!("pad byte is {}", bytes[7])));
    }
    let dims_end = HEADER + 8 * ndim;
    if bytes.len() < dims_end {
        return Err(Error::BadHeader(format!("header declares {ndim} dims but the file ends early")));
    }
    let mut shape = Vec::with_capacity(ndim);
    for c in bytes[HEADER..dims_end].chunks_exact(8) {
        let d = u64::from_le_bytes(c.try_into().expect("chunk of 8"));
        if d == 0 || d > usize::MAX as u64 {
            return Err(Error::BadHeader(format!("invalid extent {d}")));
        }
        shape.push(d as usize);
    }
    let expected = shape
        .iter()
        .try_fold(dtype.size_of() as u64, |acc, &d| acc.checked_mul(d as u64))
        .ok_or_else(|| Error::BadHeader(format!("shape {shape:?} overflows")))?;
    let payload = &bytes[dims_end..];
    if payload.len() as u64 != expected {
        if (payload.len() as u64) < expected {
            return Err(Error::TruncatedPayload {
                expected,
                found: payload.len() as u64,
            });
        }
        return Err(Error::BadHeader(format!(
            "{} trailing bytes after payload",
            payload.len() as u64 - expected
        )));
    }
    Ok(match dtype {
        DType::F32 => Tensor::F32(Array::new(
            &shape,
            payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
        )?),
        DType::I32 => Tensor::I32(Array::new(
            &shape,
            payload.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().unwrap())).collect(),
        )?),
        DType::U8 => Tensor::U8(Array::new(&shape, payload.to_vec())?),
        DType::F64 => unreachable!(),
    })
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_tensor(t)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes)
}
