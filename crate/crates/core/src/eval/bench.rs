//! Query-throughput benchmark over an approximate index.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::{recall, GroundTruth};
use crate::approx::{coarse, reorder, ApproxIndex, ApproxScratch, ApproxSearchParams};
use crate::dataset::SparseDataset;
use crate::error::{Error, Result};
use crate::index::{postings_visited, TopKResult};
use crate::scalar::Scalar;
use crate::sparse::alpha_mass_subvector;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BenchConfig {
    pub params: ApproxSearchParams,
    pub threads: usize,
    /// Re-score the coarse pool exactly; when false the coarse top-k is
    /// returned as is.
    pub reorder: bool,
    /// Run every query once untimed before measuring.
    pub warmup: bool,
}

impl BenchConfig {
    pub fn new(params: ApproxSearchParams, threads: usize) -> Self {
        Self {
            params,
            threads,
            reorder: true,
            warmup: true,
        }
    }
}

/// Summary of one benchmark run. Column order is the CSV schema.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub queries: usize,
    pub threads: usize,
    pub k: usize,
    pub beta: f64,
    pub gamma: usize,
    pub reorder: bool,
    pub strategy: String,
    pub lambda: usize,
    /// Mean strict recall@k; `None` without ground truth.
    pub recall: Option<f64>,
    pub wall_secs: f64,
    pub qps: f64,
    pub per_core_qps: f64,
    pub mean_latency_us: f64,
    pub median_latency_us: f64,
    /// Summed per-query time in the coarse phase.
    pub coarse_secs: f64,
    /// Summed per-query time in the reorder phase.
    pub reorder_secs: f64,
    /// Share of per-query time spent reordering.
    pub reorder_share: f64,
    pub mean_postings_visited: f64,
}

#[derive(Clone, Debug)]
pub struct BenchRun {
    pub report: BenchReport,
    /// Per-query results in query order.
    pub results: Vec<TopKResult>,
}

struct Outcome {
    result: TopKResult,
    coarse: Duration,
    reorder: Duration,
}

fn one_query<T: Scalar>(
    aidx: &ApproxIndex<T>,
    queries: &SparseDataset<T>,
    qi: usize,
    cfg: &BenchConfig,
    scratch: &mut ApproxScratch<T>,
) -> Result<Outcome> {
    let q = queries.row(qi);
    let p = &cfg.params;
    let t0 = Instant::now();
    let gamma = if cfg.reorder { p.gamma } else { p.k };
    let pool = coarse(aidx, q, p.beta, gamma, scratch)?;
    let t1 = Instant::now();
    if !cfg.reorder {
        return Ok(Outcome {
            result: pool,
            coarse: t1 - t0,
            reorder: Duration::ZERO,
        });
    }
    let result = reorder(aidx, q, &pool, p.k, scratch);
    Ok(Outcome {
        result,
        coarse: t1 - t0,
        reorder: t1.elapsed(),
    })
}

/// Runs every query over `threads` workers pulling from a shared counter,
/// each with private scratch. Results do not depend on the thread count.
fn run_pass<T: Scalar>(
    aidx: &ApproxIndex<T>,
    queries: &SparseDataset<T>,
    cfg: &BenchConfig,
) -> Result<(Vec<Outcome>, Duration)> {
    let next = AtomicUsize::new(0);
    let start = Instant::now();
    let parts: Vec<Result<Vec<(usize, Outcome)>>> = thread::scope(|s| {
        let workers: Vec<_> = (0..cfg.threads)
            .map(|_| {
                let next = &next;
                s.spawn(move || {
                    let mut scratch = ApproxScratch::for_index(aidx);
                    let mut done = Vec::new();
                    loop {
                        let qi = next.fetch_add(1, Ordering::Relaxed);
                        if qi >= queries.n() {
                            return Ok(done);
                        }
                        done.push((qi, one_query(aidx, queries, qi, cfg, &mut scratch)?));
                    }
                })
            })
            .collect();
        workers
            .into_iter()
            .map(|w| w.join().expect("benchmark worker panicked"))
            .collect()
    });
    let wall = start.elapsed();
    let mut slots: Vec<Option<Outcome>> = (0..queries.n()).map(|_| None).collect();
    for part in parts {
        for (qi, o) in part? {
            slots[qi] = Some(o);
        }
    }
    let outcomes = slots
        .into_iter()
        .map(|o| o.expect("every query is claimed once"))
        .collect();
    Ok((outcomes, wall))
}

/// Benchmarks approximate search over `queries`. Timing covers searches only;
/// the index is built and the queries loaded beforehand.
pub fn run_bench<T: Scalar>(
    aidx: &ApproxIndex<T>,
    queries: &SparseDataset<T>,
    cfg: &BenchConfig,
    truth: Option<&GroundTruth>,
) -> Result<BenchRun> {
    if queries.is_empty() {
        return Err(Error::param("benchmark needs at least one query"));
    }
    if cfg.threads == 0 {
        return Err(Error::param("threads must be at least 1"));
    }
    cfg.params.validate()?;
    if let Some(gt) = truth {
        if gt.nq() != queries.n() {
            return Err(Error::param(format!(
                "ground truth has {} queries, query file has {}",
                gt.nq(),
                queries.n()
            )));
        }
        if gt.k() < cfg.params.k.min(aidx.dataset().n()) {
            return Err(Error::param(format!(
                "ground truth k = {} is below k = {}",
                gt.k(),
                cfg.params.k
            )));
        }
    }

    if cfg.warmup {
        run_pass(aidx, queries, cfg)?;
    }
    let (outcomes, wall) = run_pass(aidx, queries, cfg)?;

    let nq = queries.n();
    let mut lat: Vec<f64> = outcomes
        .iter()
        .map(|o| (o.coarse + o.reorder).as_secs_f64() * 1e6)
        .collect();
    let mean_latency_us = lat.iter().sum::<f64>() / nq as f64;
    lat.sort_by(f64::total_cmp);
    let median_latency_us = if nq % 2 == 1 {
        lat[nq / 2]
    } else {
        (lat[nq / 2 - 1] + lat[nq / 2]) / 2.0
    };
    let coarse_secs: f64 = outcomes.iter().map(|o| o.coarse.as_secs_f64()).sum();
    let reorder_secs: f64 = outcomes.iter().map(|o| o.reorder.as_secs_f64()).sum();
    let busy = coarse_secs + reorder_secs;

    let mut postings = 0u64;
    for q in queries.rows() {
        postings += if cfg.params.beta >= 1.0 {
            postings_visited(aidx.index(), q)
        } else {
            postings_visited(aidx.index(), &alpha_mass_subvector(q, cfg.params.beta)?)
        };
    }

    let results: Vec<TopKResult> = outcomes.into_iter().map(|o| o.result).collect();
    let recall = truth.map(|gt| {
        results
            .iter()
            .enumerate()
            .map(|(q, r)| recall(r, gt.ids(q), cfg.params.k))
            .sum::<f64>()
            / nq as f64
    });
    let wall_secs = wall.as_secs_f64().max(f64::MIN_POSITIVE);
    let qps = nq as f64 / wall_secs;
    let report = BenchReport {
        queries: nq,
        threads: cfg.threads,
        k: cfg.params.k,
        beta: cfg.params.beta,
        gamma: cfg.params.gamma,
        reorder: cfg.reorder,
        strategy: aidx.strategy().to_string(),
        lambda: aidx.lambda(),
        recall,
        wall_secs,
        qps,
        per_core_qps: qps / cfg.threads as f64,
        mean_latency_us,
        median_latency_us,
        coarse_secs,
        reorder_secs,
        reorder_share: if busy > 0.0 { reorder_secs / busy } else { 0.0 },
        mean_postings_visited: postings as f64 / nq as f64,
    };
    Ok(BenchRun { report, results })
}
