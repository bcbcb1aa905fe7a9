//! Exact answers for a query set and their binary file.
//!
//! Layout (little-endian): `u64 nq, u64 k`, then per query `k x u32 ids`
//! followed by `k x f32 scores`.

use std::path::Path;
use std::thread;

use super::brute_force_topk;
use crate::dataset::SparseDataset;
use crate::error::{Error, Result};
use crate::index::TopKResult;
use crate::io::{put_u32s, put_u64, read_file, write_file, ByteReader};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    k: usize,
    ids: Vec<u32>,
    scores: Vec<f32>,
}

impl GroundTruth {
    /// Builds from per-query results that each hold exactly `k` entries.
    pub fn from_results(results: &[TopKResult], k: usize) -> Result<Self> {
        let mut ids = Vec::with_capacity(results.len() * k);
        let mut scores = Vec::with_capacity(results.len() * k);
        for (qi, r) in results.iter().enumerate() {
            if r.len() != k {
                return Err(Error::param(format!(
                    "query {qi} has {} results, expected {k}",
                    r.len()
                )));
            }
            for h in r.entries() {
                ids.push(h.id);
                scores.push(h.score as f32);
            }
        }
        Ok(Self { k, ids, scores })
    }

    pub fn nq(&self) -> usize {
        self.ids.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ids(&self, q: usize) -> &[u32] {
        &self.ids[q * self.k..(q + 1) * self.k]
    }

    pub fn scores(&self, q: usize) -> &[f32] {
        &self.scores[q * self.k..(q + 1) * self.k]
    }

    fn check(&self) -> Result<()> {
        for q in 0..self.nq() {
            let ids = self.ids(q);
            let scores = self.scores(q);
            if scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::MalformedHeader(format!("query {q}: non-finite score")));
            }
            if scores.windows(2).any(|w| w[0] < w[1]) {
                return Err(Error::MalformedHeader(format!("query {q}: scores not descending")));
            }
            let mut sorted = ids.to_vec();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::MalformedHeader(format!("query {q}: duplicate id")));
            }
        }
        Ok(())
    }
}

/// Exact top-`k` for every query, `k` clamped to the dataset size, spread
/// over `threads` workers.
pub fn compute_ground_truth<T: Scalar>(
    dataset: &SparseDataset<T>,
    queries: &SparseDataset<T>,
    k: usize,
    threads: usize,
) -> Result<GroundTruth> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    let k = k.min(dataset.n());
    let threads = threads.clamp(1, queries.n().max(1));
    let chunk = queries.n().div_ceil(threads).max(1);
    let mut results: Vec<TopKResult> = vec![TopKResult::default(); queries.n()];
    thread::scope(|s| {
        for (c, out) in results.chunks_mut(chunk).enumerate() {
            s.spawn(move || {
                for (o, slot) in out.iter_mut().enumerate() {
                    *slot = brute_force_topk(dataset, queries.row(c * chunk + o), k);
                }
            });
        }
    });
    GroundTruth::from_results(&results, k)
}

pub fn encode_ground_truth(gt: &GroundTruth) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + gt.ids.len() * 8);
    put_u64(&mut out, gt.nq() as u64);
    put_u64(&mut out, gt.k as u64);
    for q in 0..gt.nq() {
        put_u32s(&mut out, gt.ids(q));
        for s in gt.scores(q) {
            out.extend_from_slice(&s.to_le_bytes());
        }
    }
    out
}

pub fn decode_ground_truth(bytes: &[u8]) -> Result<GroundTruth> {
    let mut r = ByteReader::new(bytes);
    let nq = r.u64("ground truth header")?;
    let k = r.u64("ground truth header")?;
    if nq > 0 && k == 0 {
        return Err(Error::MalformedHeader("k = 0 with queries present".into()));
    }
    let total = nq
        .checked_mul(k)
        .ok_or_else(|| Error::MalformedHeader(format!("{nq} x {k} overflows")))?;
    let total = r.count("ground truth rows", total, 8)?;
    let k = k as usize;
    let mut ids = Vec::with_capacity(total);
    let mut scores = Vec::with_capacity(total);
    for _ in 0..nq {
        ids.extend(r.u32_vec("ground truth ids", k)?);
        scores.extend(r.scalar_vec::<f32>("ground truth scores", k)?);
    }
    r.finish()?;
    let gt = GroundTruth { k, ids, scores };
    gt.check()?;
    Ok(gt)
}

pub fn save_ground_truth(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_ground_truth(gt))
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    decode_ground_truth(&read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::gen_random;

    fn sample() -> (SparseDataset<f32>, SparseDataset<f32>) {
        (
            gen_random(400, 120, 12, 31).unwrap(),
            gen_random(25, 120, 8, 32).unwrap(),
        )
    }

    #[test]
    fn threads_do_not_change_truth() {
        let (ds, qs) = sample();
        let one = compute_ground_truth(&ds, &qs, 10, 1).unwrap();
        for t in [2, 3, 8, 64] {
            assert_eq!(compute_ground_truth(&ds, &qs, 10, t).unwrap(), one);
        }
        assert_eq!(one.nq(), 25);
        for q in 0..25 {
            let want = brute_force_topk(&ds, qs.row(q), 10);
            assert_eq!(one.ids(q), want.ids().collect::<Vec<_>>().as_slice());
        }
    }

    #[test]
    fn file_layout_and_roundtrip() {
        let (ds, qs) = sample();
        let gt = compute_ground_truth(&ds, &qs, 1, 2).unwrap();
        let bytes = encode_ground_truth(&gt);
        assert_eq!(bytes.len(), 16 + 25 * 8);
        assert_eq!(&bytes[0..8], &25u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &1u64.to_le_bytes());
        assert_eq!(&bytes[16..20], &gt.ids(0)[0].to_le_bytes());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gt.bin");
        save_ground_truth(&gt, &p).unwrap();
        let back = load_ground_truth(&p).unwrap();
        assert_eq!(back, gt);
        assert_eq!(encode_ground_truth(&back), bytes);
    }

    #[test]
    fn k_clamped_to_dataset() {
        let ds: SparseDataset<f32> = gen_random(6, 20, 3, 33).unwrap();
        let gt = compute_ground_truth(&ds, &ds, 50, 1).unwrap();
        assert_eq!(gt.k(), 6);
        assert!(compute_ground_truth(&ds, &ds, 0, 1).is_err());
    }

    #[test]
    fn rejects_damaged_files() {
        let (ds, qs) = sample();
        let gt = compute_ground_truth(&ds, &qs, 3, 1).unwrap();
        let bytes = encode_ground_truth(&gt);
        assert!(matches!(decode_ground_truth(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_ground_truth(&extra), Err(Error::TrailingBytes(1))));
        // Swap the first two scores of query 0 so they ascend.
        let mut swapped = bytes.clone();
        let (a, b) = (16 + 12, 16 + 16);
        let first: [u8; 4] = swapped[a..a + 4].try_into().unwrap();
        let second: [u8; 4] = swapped[b..b + 4].try_into().unwrap();
        if first != second {
            swapped[a..a + 4].copy_from_slice(&second);
            swapped[b..b + 4].copy_from_slice(&first);
            assert!(matches!(decode_ground_truth(&swapped), Err(Error::MalformedHeader(_))));
        }
        let mut huge = bytes;
        huge[0..8].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode_ground_truth(&huge).is_err());
    }
}
