//! CSR binary file format.
//!
//! Little-endian layout: `u64 n, u64 d, u64 nnz`, then `(n + 1) x u64 indptr`,
//! `nnz x u32 indices` and `nnz x T data` (`f32` for the standard format).
//! Query files use the same layout.

use std::path::Path;

use crate::dataset::SparseDataset;
use crate::error::{Error, Result};
use crate::io::{put_scalars, put_u32s, put_u64, read_file, write_file, ByteReader};
use crate::scalar::Scalar;

pub fn encode_csr<T: Scalar>(ds: &SparseDataset<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + ds.indptr().len() * 8 + ds.nnz() * (4 + T::BYTES));
    put_u64(&mut out, ds.n() as u64);
    put_u64(&mut out, ds.d() as u64);
    put_u64(&mut out, ds.nnz() as u64);
    for &p in ds.indptr() {
        put_u64(&mut out, p);
    }
    put_u32s(&mut out, ds.indices());
    put_scalars(&mut out, ds.data());
    out
}

pub fn decode_csr<T: Scalar>(bytes: &[u8]) -> Result<SparseDataset<T>> {
    let mut r = ByteReader::new(bytes);
    let n = r.u64("csr header")?;
    let d = r.u64("csr header")?;
    let nnz = r.u64("csr header")?;
    if d > u32::MAX as u64 + 1 {
        return Err(Error::MalformedHeader(format!(
            "dimensionality {d} exceeds u32 index range"
        )));
    }
    let rows = n
        .checked_add(1)
        .ok_or_else(|| Error::MalformedHeader(format!("row count {n} overflows")))?;
    let rows = r.count("csr indptr", rows, 8)?;
    let indptr = r.u64_vec("csr indptr", rows)?;
    let nnz = r.count("csr indices", nnz, 4 + T::BYTES)?;
    let indices = r.u32_vec("csr indices", nnz)?;
    let data = r.scalar_vec::<T>("csr data", nnz)?;
    r.finish()?;
    SparseDataset::new(d as usize, indptr, indices, data)
}

pub fn save_csr<T: Scalar>(ds: &SparseDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_csr(ds))
}

pub fn load_csr<T: Scalar>(path: impl AsRef<Path>) -> Result<SparseDataset<T>> {
    decode_csr(&read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::gen_random;
    use proptest::prelude::*;

    fn tiny() -> SparseDataset<f32> {
        SparseDataset::new(6, vec![0, 2, 2, 3], vec![1, 4, 5], vec![0.5, -1.25, 3.0]).unwrap()
    }

    #[test]
    fn layout_is_fixed() {
        let bytes = encode_csr(&tiny());
        assert_eq!(bytes.len(), 24 + 4 * 8 + 3 * 4 + 3 * 4);
        assert_eq!(&bytes[0..8], &3u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &6u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &3u64.to_le_bytes());
        // indptr[1] = 2
        assert_eq!(&bytes[32..40], &2u64.to_le_bytes());
        // first index, then last value
        assert_eq!(&bytes[56..60], &1u32.to_le_bytes());
        assert_eq!(&bytes[bytes.len() - 4..], &3.0f32.to_le_bytes());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csr");
        let ds: SparseDataset<f32> = gen_random(300, 1000, 17, 3).unwrap();
        save_csr(&ds, &p).unwrap();
        let back: SparseDataset<f32> = load_csr(&p).unwrap();
        assert_eq!(back, ds);
        assert_eq!(std::fs::read(&p).unwrap(), encode_csr(&back));
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let bytes = encode_csr(&tiny());
        for cut in [0, 7, 24, 40, bytes.len() - 1] {
            let err = decode_csr::<f32>(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::Truncated { .. }), "cut {cut}: {err}");
        }
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_csr(&tiny());
        bytes.push(0);
        assert!(matches!(decode_csr::<f32>(&bytes), Err(Error::TrailingBytes(1))));
    }

    #[test]
    fn huge_declared_counts_do_not_allocate() {
        let mut bytes = Vec::new();
        put_u64(&mut bytes, u64::MAX - 1);
        put_u64(&mut bytes, 10);
        put_u64(&mut bytes, 0);
        assert!(matches!(decode_csr::<f32>(&bytes), Err(Error::Truncated { .. })));
    }

    #[test]
    fn out_of_range_index_names_row_and_offset() {
        let mut bytes = encode_csr(&tiny());
        // indices start after the 24-byte header and 4 indptr entries
        let at = 24 + 32 + 4 * 2;
        bytes[at..at + 4].copy_from_slice(&6u32.to_le_bytes());
        match decode_csr::<f32>(&bytes) {
            Err(Error::IndexOutOfRange { row, offset, index, dim }) => {
                assert_eq!((row, offset, index, dim), (2, 2, 6, 6));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stored_zero_rejected() {
        let mut bytes = encode_csr(&tiny());
        let at = bytes.len() - 8;
        bytes[at..at + 4].copy_from_slice(&0.0f32.to_le_bytes());
        assert!(matches!(
            decode_csr::<f32>(&bytes),
            Err(Error::ZeroValue { row: 0, offset: 1 })
        ));
    }

    #[test]
    fn f64_payloads_roundtrip() {
        let ds: SparseDataset<f64> = gen_random(20, 50, 5, 8).unwrap();
        assert_eq!(decode_csr::<f64>(&encode_csr(&ds)).unwrap(), ds);
    }

    proptest! {
        #[test]
        fn encode_decode_identity(n in 0usize..40, d in 1usize..60, seed in any::<u64>(), fill in 0usize..8) {
            let ds: SparseDataset<f32> = gen_random(n, d, fill.min(d), seed).unwrap();
            let bytes = encode_csr(&ds);
            let back: SparseDataset<f32> = decode_csr(&bytes).unwrap();
            prop_assert_eq!(encode_csr(&back), bytes);
        }
    }
}
