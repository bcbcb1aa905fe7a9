//! Index file format (little-endian).
//!
//! Header `u64 n, u64 d, u64 lambda, u64 sigma`, then for every non-empty
//! dimension in ascending order: `u32 dim, u32 window_count_present`, and per
//! present window `u32 w, u64 len, len x u32 slots, len x T vals`.

use std::path::Path;

use super::InvertedIndex;
use crate::error::{Error, Result};
use crate::io::{put_scalars, put_u32, put_u32s, put_u64, read_file, write_file, ByteReader};
use crate::scalar::Scalar;

pub fn encode_index<T: Scalar>(index: &InvertedIndex<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + index.memory_bytes());
    put_u64(&mut out, index.n as u64);
    put_u64(&mut out, index.d as u64);
    put_u64(&mut out, index.lambda as u64);
    put_u64(&mut out, index.sigma as u64);
    for j in 0..index.d {
        let present = index.list_ptr[j + 1] - index.list_ptr[j];
        if present == 0 {
            continue;
        }
        put_u32(&mut out, j as u32);
        put_u32(&mut out, present as u32);
        for win in index.windows(j) {
            put_u32(&mut out, win.window);
            put_u64(&mut out, win.len() as u64);
            put_u32s(&mut out, win.slots);
            put_scalars(&mut out, win.vals);
        }
    }
    out
}

fn corrupt(msg: String) -> Error {
    Error::CorruptIndex(msg)
}

pub fn decode_index<T: Scalar>(bytes: &[u8]) -> Result<InvertedIndex<T>> {
    let mut r = ByteReader::new(bytes);
    let n = r.u64("index header")?;
    let d = r.u64("index header")?;
    let lambda = r.u64("index header")?;
    let sigma = r.u64("index header")?;
    if n > u32::MAX as u64 || d > u32::MAX as u64 + 1 {
        return Err(Error::MalformedHeader(format!("n = {n}, d = {d} out of range")));
    }
    if lambda == 0 {
        return Err(Error::MalformedHeader("lambda = 0".into()));
    }
    if sigma != n.div_ceil(lambda) {
        return Err(Error::MalformedHeader(format!(
            "sigma = {sigma} but ceil({n} / {lambda}) = {}",
            n.div_ceil(lambda)
        )));
    }
    let (n, d, lambda, sigma) = (n as usize, d as usize, lambda as usize, sigma as usize);

    let mut list_ptr = vec![0usize; d + 1];
    let mut win_ids = Vec::new();
    let mut win_starts = Vec::new();
    let mut slots = Vec::new();
    let mut vals = Vec::new();
    let mut next_dim = 0usize;
    while r.remaining() > 0 {
        let dim = r.u32("index list header")? as usize;
        let present = r.u32("index list header")? as usize;
        if dim < next_dim || dim >= d {
            return Err(corrupt(format!("dimension {dim} out of order or >= d")));
        }
        if present == 0 || present > sigma {
            return Err(corrupt(format!("dimension {dim} lists {present} windows")));
        }
        for p in &mut list_ptr[next_dim..=dim] {
            *p = win_ids.len();
        }
        let mut prev_w: Option<u32> = None;
        for _ in 0..present {
            let w = r.u32("index window header")?;
            let len = r.u64("index window header")?;
            if w as usize >= sigma || prev_w.is_some_and(|p| p >= w) {
                return Err(corrupt(format!("dimension {dim}: window {w} out of order")));
            }
            prev_w = Some(w);
            let len = r.count("index window", len, 4 + T::BYTES)?;
            if len == 0 {
                return Err(corrupt(format!("dimension {dim}: empty window {w}")));
            }
            let width = lambda.min(n - w as usize * lambda);
            let s = r.u32_vec("index slots", len)?;
            if s.windows(2).any(|p| p[0] >= p[1]) || s[len - 1] as usize >= width {
                return Err(corrupt(format!(
                    "dimension {dim}, window {w}: slots unsorted or >= {width}"
                )));
            }
            let v = r.scalar_vec::<T>("index values", len)?;
            if v.iter().any(|x| *x == T::zero() || !x.is_finite()) {
                return Err(corrupt(format!(
                    "dimension {dim}, window {w}: zero or non-finite value"
                )));
            }
            win_ids.push(w);
            win_starts.push(slots.len());
            slots.extend_from_slice(&s);
            vals.extend_from_slice(&v);
        }
        next_dim = dim + 1;
        list_ptr[next_dim] = win_ids.len();
    }
    for p in &mut list_ptr[next_dim..=d] {
        *p = win_ids.len();
    }
    win_starts.push(slots.len());
    r.finish()?;
    Ok(InvertedIndex {
        n,
        d,
        lambda,
        sigma,
        list_ptr,
        win_ids,
        win_starts,
        slots,
        vals,
    })
}

pub fn save_index<T: Scalar>(index: &InvertedIndex<T>, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_index(index))
}

pub fn load_index<T: Scalar>(path: impl AsRef<Path>) -> Result<InvertedIndex<T>> {
    decode_index(&read_file(path.as_ref())?)
}
