//! Window-size sweep: one full-precision index per `lambda`, identical query
//! load, timing per window size.

use std::time::Instant;

use serde::Serialize;

use crate::dataset::SparseDataset;
use crate::error::{Error, Result};
use crate::index::{build_full, postings_visited, search_full, SearchScratch, TopKResult};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: usize,
    pub sigma: usize,
    pub qps: f64,
    pub mean_latency_us: f64,
    pub mean_postings_visited: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Every `lambda` returned the same results, bit for bit.
    pub results_invariant: bool,
    /// Every `lambda` visited the same number of postings per query.
    pub postings_invariant: bool,
    #[serde(skip)]
    pub results: Vec<TopKResult>,
}

/// Builds an index per window size, runs every query once untimed and once
/// timed, single-threaded, and checks result invariance across sizes.
pub fn sweep_window<T: Scalar>(
    dataset: &SparseDataset<T>,
    queries: &SparseDataset<T>,
    lambdas: &[usize],
    k: usize,
) -> Result<SweepReport> {
    if lambdas.is_empty() {
        return Err(Error::param("no window sizes given"));
    }
    if queries.is_empty() {
        return Err(Error::param("sweep needs at least one query"));
    }
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if let Some(&bad) = lambdas.iter().find(|&&l| l == 0 || l > dataset.n().max(1)) {
        return Err(Error::param(format!(
            "window size {bad} outside [1, {}]",
            dataset.n()
        )));
    }

    let mut rows = Vec::with_capacity(lambdas.len());
    let mut reference: Option<Vec<TopKResult>> = None;
    let mut reference_postings: Option<Vec<u64>> = None;
    let mut results_invariant = true;
    let mut postings_invariant = true;
    for &lambda in lambdas {
        let index = build_full(dataset, lambda)?;
        let mut scratch = SearchScratch::for_index(&index);
        for q in queries.rows() {
            search_full(&index, q, k, &mut scratch);
        }
        let mut results = Vec::with_capacity(queries.n());
        let start = Instant::now();
        for q in queries.rows() {
            results.push(search_full(&index, q, k, &mut scratch));
        }
        let secs = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
        let postings: Vec<u64> = queries.rows().map(|q| postings_visited(&index, q)).collect();

        match &reference {
            Some(r) => results_invariant &= *r == results,
            None => reference = Some(results),
        }
        match &reference_postings {
            Some(p) => postings_invariant &= *p == postings,
            None => reference_postings = Some(postings.clone()),
        }
        let nq = queries.n() as f64;
        rows.push(SweepRow {
            lambda: index.lambda(),
            sigma: index.sigma(),
            qps: nq / secs,
            mean_latency_us: secs * 1e6 / nq,
            mean_postings_visited: postings.iter().sum::<u64>() as f64 / nq,
        });
    }
    Ok(SweepReport {
        rows,
        results_invariant,
        postings_invariant,
        results: reference.unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::gen_random;
    use crate::eval::brute_force_topk;

    #[test]
    fn invariant_across_window_sizes() {
        let ds: SparseDataset<f32> = gen_random(4_000, 2_000, 40, 51).unwrap();
        let qs: SparseDataset<f32> = gen_random(30, 2_000, 20, 52).unwrap();
        let rep = sweep_window(&ds, &qs, &[1, 100, 1_000, 4_000], 10).unwrap();
        assert!(rep.results_invariant);
        assert!(rep.postings_invariant);
        assert_eq!(rep.rows.len(), 4);
        assert_eq!(rep.rows[0].sigma, 4_000);
        assert_eq!(rep.rows[3].sigma, 1);
        assert!(rep.rows.iter().all(|r| r.qps > 0.0));
        for (q, r) in qs.rows().zip(&rep.results) {
            let want = brute_force_topk(&ds, q, 10);
            assert_eq!(r.len(), want.len());
        }
    }

    #[test]
    fn rejects_out_of_range_windows() {
        let ds: SparseDataset<f32> = gen_random(100, 50, 5, 53).unwrap();
        assert!(sweep_window(&ds, &ds, &[0], 5).is_err());
        assert!(sweep_window(&ds, &ds, &[101], 5).is_err());
        assert!(sweep_window(&ds, &ds, &[], 5).is_err());
        assert!(sweep_window(&ds, &ds, &[100], 0).is_err());
    }
}
