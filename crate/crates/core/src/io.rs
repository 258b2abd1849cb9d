//! OCTV tensor file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes  "OCTV"
//! version u16      currently 1
//! dtype   u8       1 = f32, 2 = f64
//! rank    u8
//! dims    rank x u64
//! payload row-major elements, little-endian IEEE 754
//! ```
//!
//! Loading rejects empty shapes, truncated or oversized payloads, and any
//! non-finite element; the loaded tensor always satisfies the in-memory
//! invariants regardless of storage dtype.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: [u8; 4] = *b"OCTV";
const VERSION: u16 = 1;

/// On-disk element type. In-memory compute is always f64.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageDtype {
    F32,
    F64,
}

impl StorageDtype {
    fn code(self) -> u8 {
        match self {
            StorageDtype::F32 => 1,
            StorageDtype::F64 => 2,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(StorageDtype::F32),
            2 => Ok(StorageDtype::F64),
            _ => Err(Error::UnsupportedDtype { code }),
        }
    }

    fn width(self) -> usize {
        match self {
            StorageDtype::F32 => 4,
            StorageDtype::F64 => 8,
        }
    }
}

/// Loads a tensor from an OCTV file, widening f32 payloads to f64.
pub fn load_tensor<P: AsRef<Path>>(path: P) -> Result<Tensor> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(header_eof)?;
    if magic != MAGIC {
        return Err(Error::MalformedHeader {
            reason: format!("bad magic {magic:?}"),
        });
    }
    let version = r.read_u16::<LittleEndian>().map_err(header_eof)?;
    if version != VERSION {
        return Err(Error::MalformedHeader {
            reason: format!("unsupported version {version}"),
        });
    }
    let dtype = StorageDtype::from_code(r.read_u8().map_err(header_eof)?)?;
    let rank = r.read_u8().map_err(header_eof)?;
    if rank == 0 {
        return Err(Error::MalformedHeader {
            reason: "rank 0".to_string(),
        });
    }

    let mut shape = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        let dim = r.read_u64::<LittleEndian>().map_err(header_eof)?;
        if dim == 0 {
            return Err(Error::EmptyTensor);
        }
        shape.push(usize::try_from(dim).map_err(|_| Error::MalformedHeader {
            reason: format!("dimension {dim} exceeds addressable size"),
        })?);
    }
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::MalformedHeader {
            reason: "shape product overflows".to_string(),
        })?;

    let expected = (len as u64) * (dtype.width() as u64);
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let found = payload.len() as u64;
    if found < expected {
        return Err(Error::TruncatedPayload { expected, found });
    }
    if found > expected {
        return Err(Error::TrailingData {
            extra: found - expected,
        });
    }

    let mut data = Vec::with_capacity(len);
    match dtype {
        StorageDtype::F32 => {
            for chunk in payload.chunks_exact(4) {
                data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
            }
        }
        StorageDtype::F64 => {
            for chunk in payload.chunks_exact(8) {
                data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
    }
    if let Some(index) = data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }

    Tensor::from_vec(data, &shape)
}

/// Saves a tensor with f64 storage. `load_tensor(save_tensor(t)) == t`
/// bit-exactly.
pub fn save_tensor<P: AsRef<Path>>(t: &Tensor, path: P) -> Result<()> {
    save_tensor_as(t, path, StorageDtype::F64)
}

/// Saves a tensor with an explicit storage dtype. Saving as f32 rounds each
/// element to the nearest f32 and is therefore lossy.
pub fn save_tensor_as<P: AsRef<Path>>(t: &Tensor, path: P, dtype: StorageDtype) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);

    w.write_all(&MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    w.write_u8(dtype.code())?;
    let rank = u8::try_from(t.rank()).map_err(|_| Error::MalformedHeader {
        reason: format!("rank {} exceeds format maximum 255", t.rank()),
    })?;
    w.write_u8(rank)?;
    for &dim in t.shape() {
        w.write_u64::<LittleEndian>(dim as u64)?;
    }
    match dtype {
        StorageDtype::F32 => {
            for &x in t.data() {
                w.write_f32::<LittleEndian>(x as f32)?;
            }
        }
        StorageDtype::F64 => {
            for &x in t.data() {
                w.write_f64::<LittleEndian>(x)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn header_eof(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::MalformedHeader {
            reason: "file ends inside header".to_string(),
        }
    } else {
        Error::Io(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tempdir() -> tempfile::TempDir {
        tempfile::tempdir().expect("create temp dir")
    }

    #[test]
    fn f64_round_trip_is_bit_exact() {
        let dir = tempdir();
        let path = dir.path().join("t.octv");
        let t = Tensor::from_vec(vec![1.0, 2.5, -3.125, 4e-300], &[2, 2]).unwrap();
        save_tensor(&t, &path).unwrap();
        let back = load_tensor(&path).unwrap();
        assert_eq!(back.shape(), t.shape());
        for (a, b) in back.data().iter().zip(t.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn f32_payload_widens() {
        let dir = tempdir();
        let path = dir.path().join("t32.octv");
        let t = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]).unwrap();
        save_tensor_as(&t, &path, StorageDtype::F32).unwrap();
        let back = load_tensor(&path).unwrap();
        assert_eq!(back.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn bad_magic_is_malformed() {
        let dir = tempdir();
        let path = dir.path().join("bad.octv");
        std::fs::write(&path, b"NOPE\x01\x00\x02\x01").unwrap();
        let err = load_tensor(&path).unwrap_err();
        assert!(matches!(err, Error::MalformedHeader { .. }));
    }

    #[test]
    fn unknown_dtype_code_is_rejected() {
        let dir = tempdir();
        let path = dir.path().join("dtype.octv");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"OCTV");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.push(7); // dtype
        bytes.push(1); // rank
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = load_tensor(&path).unwrap_err();
        assert!(matches!(err, Error::UnsupportedDtype { code: 7 }));
        assert!(err.to_string().contains("unsupported dtype"));
    }

    #[test]
    fn zero_dimension_is_empty_tensor() {
        let dir = tempdir();
        let path = dir.path().join("empty.octv");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"OCTV");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.push(2); // f64
        bytes.push(1); // rank
        bytes.extend_from_slice(&0u64.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = load_tensor(&path).unwrap_err();
        assert!(matches!(err, Error::EmptyTensor));
        assert_eq!(err.to_string(), "empty tensor");
    }

    #[test]
    fn nan_payload_reports_index() {
        let dir = tempdir();
        let path = dir.path().join("nan.octv");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"OCTV");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.push(2);
        bytes.push(1);
        bytes.extend_from_slice(&3u64.to_le_bytes());
        for v in [1.0f64, 2.0, f64::NAN] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        let err = load_tensor(&path).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 2 }));
        assert_eq!(err.to_string(), "non-finite value at index 2");
    }

    #[test]
    fn truncated_payload_reports_counts() {
        let dir = tempdir();
        let path = dir.path().join("trunc.octv");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"OCTV");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.push(2);
        bytes.push(1);
        bytes.extend_from_slice(&4u64.to_le_bytes());
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = load_tensor(&path).unwrap_err();
        assert!(matches!(
            err,
            Error::TruncatedPayload {
                expected: 32,
                found: 8
            }
        ));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let dir = tempdir();
        let path = dir.path().join("trail.octv");
        let t = Tensor::from_slice(&[0.5]).unwrap();
        save_tensor(&t, &path).unwrap();
        let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(&[0xAB]).unwrap();
        drop(f);
        let err = load_tensor(&path).unwrap_err();
        assert!(matches!(err, Error::TrailingData { extra: 1 }));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let t = Tensor::from_slice(&[0.5]).unwrap();
        let err = save_tensor(&t, "/nonexistent-dir/t.octv").unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}
