//! Binary container for named tensors with a JSON header.
//!
//! Layout: 8-byte magic, `u32` version, `u32` header length, UTF-8 JSON
//! header, then every tensor's elements in header order as little-endian
//! IEEE-754 values of the header's dtype.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::mat::{Mat, Real};
use super::params::ParamStore;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PBECKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint stores {found} tensors, expected {expected}")]
    DtypeMismatch { expected: String, found: String },
    #[error("malformed checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dtype: String,
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

/// Writes `store` with arbitrary JSON metadata.
pub fn write_checkpoint<T: Real, W: Write>(
    mut w: W,
    meta: &serde_json::Value,
    store: &ParamStore<T>,
) -> Result<(), CheckpointError> {
    let header = Header {
        dtype: T::DTYPE.into(),
        meta: meta.clone(),
        tensors: store.iter().map(|(n, m)| TensorEntry { name: n.into(), rows: m.rows, cols: m.cols }).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(store.num_scalars() * 8);
    for (_, m) in store.iter() {
        for &x in &m.data {
            match T::DTYPE {
                "f32" => buf.extend_from_slice(&(x.as_f64() as f32).to_le_bytes()),
                _ => buf.extend_from_slice(&x.as_f64().to_le_bytes()),
            }
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a checkpoint written with the same element type.
pub fn read_checkpoint<T: Real, R: Read>(mut r: R) -> Result<(serde_json::Value, ParamStore<T>), CheckpointError> {
    let mut magic = [0; 8];
    r.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let mut json = vec![0; read_u32(&mut r)? as usize];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    if header.dtype != T::DTYPE {
        return Err(CheckpointError::DtypeMismatch { expected: T::DTYPE.into(), found: header.dtype });
    }
    let width = if T::DTYPE == "f32" { 4 } else { 8 };
    let mut store = ParamStore::new();
    for t in header.tensors {
        let mut bytes = vec![0; t.rows * t.cols * width];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(width)
            .map(|c| match width {
                4 => T::from_f64(f32::from_le_bytes(c.try_into().unwrap()) as f64),
                _ => T::from_f64(f64::from_le_bytes(c.try_into().unwrap())),
            })
            .collect();
        store.add(t.name, Mat::from_vec(t.rows, t.cols, data));
    }
    Ok((header.meta, store))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut store = ParamStore::<f32>::new();
        store.add("a", Mat::from_vec(2, 2, vec![1.5, -0.1, f32::MIN_POSITIVE, 3.0e7]));
        store.add("b", Mat::from_vec(1, 3, vec![0.0, -0.0, 1.0 / 3.0]));
        let meta = serde_json::json!({"k": 1});
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &meta, &store).unwrap();
        let (m, back) = read_checkpoint::<f32, _>(buf.as_slice()).unwrap();
        assert_eq!(m, meta);
        for ((n1, a), (n2, b)) in store.iter().zip(back.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(
                a.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                b.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
        }
        assert!(matches!(read_checkpoint::<f64, _>(buf.as_slice()), Err(CheckpointError::DtypeMismatch { .. })));
        assert!(matches!(read_checkpoint::<f32, _>(&b"garbage!"[..]), Err(CheckpointError::BadMagic)));
    }
}
