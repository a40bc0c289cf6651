//! Model checkpoint container shared by the CNN and GCN models.
//!
//! Little-endian layout:
//!
//! ```text
//! magic   u32   0x50434e53 ("SNCP")
//! version u16   1
//! prec    u8    bytes per value: 4 or 8
//! named   u8    reserved, 0
//! count   u32   number of tensors
//! table   count x { name_len u16, name bytes, rank u8, dims u32 x rank }
//! payload raw little-endian values, tensors in table order
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::precision::{Precision, Scalar};
use crate::numerics::tensor::Tensor;

pub const MAGIC: u32 = 0x5043_4e53;
pub const VERSION: u16 = 1;

pub fn save<T: Scalar>(path: impl AsRef<Path>, entries: &[(&str, &Tensor<T>)]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC.to_le_bytes());
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(T::PRECISION.bytes_per_value() as u8);
    buf.push(0);
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, tensor) in entries {
        let name_bytes = name.as_bytes();
        buf.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        buf.extend_from_slice(name_bytes);
        buf.push(tensor.rank() as u8);
        for &d in tensor.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for (_, tensor) in entries {
        for &v in tensor.as_slice() {
            match T::PRECISION {
                Precision::F32 => buf.extend_from_slice(&(v.to_f64() as f32).to_le_bytes()),
                Precision::F64 => buf.extend_from_slice(&v.to_f64().to_le_bytes()),
            }
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<(String, Tensor<T>)>> {
    let path = path.as_ref();
    let name = path.to_string_lossy().to_string();
    let bytes = fs::read(path)?;
    let mut pos = 0usize;

    let mut take = |n: usize| -> Result<&[u8]> {
        if pos + n > bytes.len() {
            return Err(Error::format(
                &name,
                format!("offset {pos}"),
                "truncated checkpoint",
            ));
        }
        let s = &bytes[pos..pos + n];
        pos += n;
        Ok(s)
    };

    let magic = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if magic != MAGIC {
        return Err(Error::format(
            &name,
            "offset 0",
            format!("bad magic {magic:#010x}"),
        ));
    }
    let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(&name, "offset 4", format!("unsupported version {version}")));
    }
    let prec = take(1)?[0];
    if prec as u64 != T::PRECISION.bytes_per_value() {
        return Err(Error::format(
            &name,
            "offset 6",
            format!(
                "checkpoint stores {prec}-byte values, expected {}",
                T::PRECISION.bytes_per_value()
            ),
        ));
    }
    take(1)?;
    let count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;

    let mut table = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let tensor_name = String::from_utf8(take(name_len)?.to_vec())
            .map_err(|_| Error::format(&name, "layer table", "non-utf8 tensor name"))?;
        let rank = take(1)?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
        }
        table.push((tensor_name, dims));
    }

    let mut out = Vec::with_capacity(count);
    for (tensor_name, dims) in table {
        let n: usize = dims.iter().product();
        let width = prec as usize;
        let raw = take(n * width)?;
        let mut data = Vec::with_capacity(n);
        for chunk in raw.chunks_exact(width) {
            let v = match T::PRECISION {
                Precision::F32 => f32::from_le_bytes(chunk.try_into().unwrap()) as f64,
                Precision::F64 => f64::from_le_bytes(chunk.try_into().unwrap()),
            };
            data.push(T::from_f64(v));
        }
        out.push((tensor_name, Tensor::new(dims, data).expect("table-consistent payload")));
    }
    if pos != bytes.len() {
        return Err(Error::format(
            &name,
            format!("offset {pos}"),
            format!("{} trailing bytes", bytes.len() - pos),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;

    #[test]
    fn round_trip_preserves_bits_f32_and_f64() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = seeded_rng(20);
        let a = Tensor::<f64>::random_uniform(vec![3, 4], -1.0, 1.0, &mut rng);
        let b = Tensor::<f64>::random_uniform(vec![7], -1.0, 1.0, &mut rng);
        let path = dir.path().join("m.ckpt");
        save(&path, &[("w", &a), ("b", &b)]).unwrap();
        let loaded = load::<f64>(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "w");
        assert_eq!(loaded[0].1, a);
        assert_eq!(loaded[1].1, b);

        let a32 = a.to_f32();
        save(&path, &[("w", &a32)]).unwrap();
        let loaded = load::<f32>(&path).unwrap();
        assert_eq!(loaded[0].1, a32);
    }

    #[test]
    fn precision_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let t = Tensor::<f32>::zeros(vec![2]);
        save(&path, &[("t", &t)]).unwrap();
        assert!(load::<f64>(&path).is_err());
    }

    #[test]
    fn corrupted_header_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        std::fs::write(&path, [0u8; 3]).unwrap();
        let err = load::<f64>(&path).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }
}
