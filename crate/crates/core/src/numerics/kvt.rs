//! `KVT1` tensor files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"KVT1" | ndim: u32 | ndim × extent: u64 | Π(extents) × f32 (row-major)
//! ```
//!
//! A zero-dimensional file holds a single scalar.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::TensorF32;

pub const MAGIC: [u8; 4] = *b"KVT1";

pub fn encode(t: &TensorF32) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * t.ndim() + 4 * t.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
    for &d in t.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<TensorF32> {
    let header = take(bytes, 0, 8)?;
    let magic: [u8; 4] = header[..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let ndim = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
    let ext_len = ndim.checked_mul(8).ok_or_else(|| Error::ExtentOverflow(vec![ndim as u64]))?;
    let ext_bytes = take(bytes, 8, ext_len)?;
    let extents: Vec<u64> =
        ext_bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();

    let overflow = || Error::ExtentOverflow(extents.clone());
    let mut dims = Vec::with_capacity(ndim);
    let mut count: usize = 1;
    for &e in &extents {
        let e = usize::try_from(e).map_err(|_| overflow())?;
        count = count.checked_mul(e).ok_or_else(overflow)?;
        dims.push(e);
    }
    let payload_len = count.checked_mul(4).ok_or_else(overflow)?;
    let start = 8 + ext_len;
    let payload = take(bytes, start, payload_len)?;
    if bytes.len() != start + payload_len {
        return Err(Error::Truncated { expected: start + payload_len, found: bytes.len() });
    }
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    TensorF32::new(dims, data)
}

pub fn write(path: impl AsRef<Path>, t: &TensorF32) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(t)).map_err(Error::at_path(path))
}

pub fn read(path: impl AsRef<Path>) -> Result<TensorF32> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(Error::at_path(path))?)
}

fn take(bytes: &[u8], start: usize, len: usize) -> Result<&[u8]> {
    let end = start.checked_add(len).ok_or(Error::Truncated { expected: usize::MAX, found: bytes.len() })?;
    bytes.get(start..end).ok_or(Error::Truncated { expected: end, found: bytes.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            dims in prop::collection::vec(0usize..5, 0..4),
            seed in any::<u32>(),
        ) {
            let n: usize = dims.iter().product();
            let data: Vec<f32> = (0..n).map(|i| ((i as u32 ^ seed) as f32).sin() * 1e3).collect();
            let t = TensorF32::new(dims, data).unwrap();
            let back = decode(&encode(&t)).unwrap();
            prop_assert_eq!(back.dims(), t.dims());
            let a: Vec<u32> = t.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn scalar_round_trip() {
        let s = TensorF32::scalar(-3.25).unwrap();
        let bytes = encode(&s);
        assert_eq!(bytes.len(), 8 + 4);
        assert_eq!(decode(&bytes).unwrap(), s);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode(&TensorF32::scalar(1.0).unwrap());
        bytes[3] = b'2';
        assert!(matches!(decode(&bytes), Err(Error::BadMagic(m)) if &m == b"KVT2"));
    }

    #[test]
    fn truncated_payload() {
        let bytes = encode(&TensorF32::zeros(vec![2, 3]));
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
        assert!(matches!(decode(&bytes[..6]), Err(Error::Truncated { .. })));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode(&long), Err(Error::Truncated { .. })));
    }

    #[test]
    fn extent_overflow() {
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
        bytes.extend_from_slice(&4u64.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::ExtentOverflow(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.kvt");
        let t = TensorF32::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        write(&p, &t).unwrap();
        assert_eq!(read(&p).unwrap(), t);
    }
}
