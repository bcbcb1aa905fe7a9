//! Little-endian binary readers and writers shared by the file formats.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, what: &'static str, n: usize) -> Result<&'a [u8]> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.buf.len() => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            _ => Err(Error::Truncated {
                what,
                offset: self.pos,
                needed: n,
                len: self.buf.len(),
            }),
        }
    }

    pub(crate) fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(what, 4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(what, 8)?.try_into().unwrap()))
    }

    /// Converts a declared element count to `usize`, failing early when the
    /// remaining bytes cannot possibly hold it.
    pub(crate) fn count(&self, what: &'static str, n: u64, elem: usize) -> Result<usize> {
        let remaining = (self.buf.len() - self.pos) as u128;
        if (n as u128) * (elem as u128) > remaining {
            return Err(Error::Truncated {
                what,
                offset: self.pos,
                needed: usize::try_from((n as u128) * (elem as u128)).unwrap_or(usize::MAX),
                len: self.buf.len(),
            });
        }
        Ok(n as usize)
    }

    pub(crate) fn u32_vec(&mut self, what: &'static str, n: usize) -> Result<Vec<u32>> {
        let bytes = self.take(what, n * 4)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn u64_vec(&mut self, what: &'static str, n: usize) -> Result<Vec<u64>> {
        let bytes = self.take(what, n * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn scalar_vec<T: Scalar>(&mut self, what: &'static str, n: usize) -> Result<Vec<T>> {
        let bytes = self.take(what, n * T::BYTES)?;
        Ok(bytes.chunks_exact(T::BYTES).map(T::read_le).collect())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn finish(self) -> Result<()> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            extra => Err(Error::TrailingBytes(extra)),
        }
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u32s(out: &mut Vec<u8>, vs: &[u32]) {
    out.reserve(vs.len() * 4);
    for &v in vs {
        put_u32(out, v);
    }
}

pub(crate) fn put_scalars<T: Scalar>(out: &mut Vec<u8>, vs: &[T]) {
    out.reserve(vs.len() * T::BYTES);
    for &v in vs {
        v.write_le(out);
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
