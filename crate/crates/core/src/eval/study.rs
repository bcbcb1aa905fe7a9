//! Pruning-strategy study: recall, throughput, postings reduction and
//! inner-product error per strategy over a common query load.

use serde::Serialize;

use super::{run_bench, BenchConfig, GroundTruth};
use crate::approx::{build_approx, ApproxSearchParams};
use crate::dataset::SparseDataset;
use crate::error::{Error, Result};
use crate::pruning::{computation_reduction, inner_product_error_pruned, PruneStrategy};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StudyConfig {
    pub params: ApproxSearchParams,
    pub lambda: usize,
    pub threads: usize,
    pub reorder: bool,
}

/// One strategy's measurements. Column order is the CSV schema.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub strategy: String,
    pub index_postings: usize,
    pub computation_reduction: f64,
    pub mean_normalized_ip_error: f64,
    pub recall: f64,
    pub qps: f64,
    pub mean_postings_visited: f64,
}

fn pruned_queries<T: Scalar>(queries: &SparseDataset<T>, beta: f64) -> Result<SparseDataset<T>> {
    PruneStrategy::MassRatio(beta).apply(queries)
}

/// Builds one approximate index per strategy and benchmarks it against
/// `truth`. Queries are pruned with the search `beta` for every strategy, so
/// the reduction column differs only through the dataset side.
pub fn prune_study<T: Scalar>(
    dataset: &SparseDataset<T>,
    queries: &SparseDataset<T>,
    truth: &GroundTruth,
    strategies: &[PruneStrategy],
    cfg: &StudyConfig,
) -> Result<Vec<StudyRow>> {
    if strategies.is_empty() {
        return Err(Error::param("no strategies given"));
    }
    cfg.params.validate()?;
    let pq = pruned_queries(queries, cfg.params.beta)?;
    let mut rows = Vec::with_capacity(strategies.len());
    for &s in strategies {
        s.validate()?;
        let pruned = s.apply(dataset)?;
        let computation_reduction = computation_reduction(dataset, &pruned, queries, &pq)?;
        let err = inner_product_error_pruned(dataset, &pruned, queries, &pq)?;
        let index_postings = pruned.nnz();
        drop(pruned);
        let aidx = build_approx(dataset.clone(), cfg.lambda, s)?;
        let bench = BenchConfig {
            params: cfg.params,
            threads: cfg.threads,
            reorder: cfg.reorder,
            warmup: true,
        };
        let run = run_bench(&aidx, queries, &bench, Some(truth))?;
        rows.push(StudyRow {
            strategy: s.to_string(),
            index_postings,
            computation_reduction,
            mean_normalized_ip_error: err.mean_normalized,
            recall: run.report.recall.unwrap_or(0.0),
            qps: run.report.qps,
            mean_postings_visited: run.report.mean_postings_visited,
        });
    }
    Ok(rows)
}

/// Finds the parameter of a vector-number or list-length strategy whose
/// computation reduction is closest to `target`, with queries pruned by
/// `beta`. `kind` selects the strategy; its parameter is ignored.
pub fn match_strategy<T: Scalar>(
    dataset: &SparseDataset<T>,
    queries: &SparseDataset<T>,
    kind: PruneStrategy,
    target: f64,
    beta: f64,
) -> Result<(PruneStrategy, f64)> {
    let make: fn(usize) -> PruneStrategy = match kind {
        PruneStrategy::VectorNumber(_) => PruneStrategy::VectorNumber,
        PruneStrategy::ListLength(_) => PruneStrategy::ListLength,
        _ => return Err(Error::param("only vnp and lp parameters can be matched")),
    };
    let upper = match kind {
        PruneStrategy::VectorNumber(_) => dataset.rows().map(|r| r.nnz()).max().unwrap_or(0),
        _ => dataset.column_counts().into_iter().max().unwrap_or(0) as usize,
    }
    .max(1);
    let pq = pruned_queries(queries, beta)?;
    let reduction = |p: usize| -> Result<f64> {
        let pruned = make(p).apply(dataset)?;
        computation_reduction(dataset, &pruned, queries, &pq)
    };

    // Reduction falls as the parameter grows; find the first parameter at or
    // below the target and compare it with its neighbour.
    let (mut lo, mut hi) = (1usize, upper);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if reduction(mid)? <= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let at = reduction(lo)?;
    if lo > 1 {
        let before = reduction(lo - 1)?;
        if (before - target).abs() < (at - target).abs() {
            return Ok((make(lo - 1), before));
        }
    }
    Ok((make(lo), at))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::gen_random;
    use crate::eval::compute_ground_truth;

    fn data() -> (SparseDataset<f32>, SparseDataset<f32>) {
        (
            gen_random(3_000, 1_500, 40, 61).unwrap(),
            gen_random(50, 1_500, 20, 62).unwrap(),
        )
    }

    #[test]
    fn matching_lands_near_target() {
        let (ds, qs) = data();
        let pq = PruneStrategy::MassRatio(0.5).apply(&qs).unwrap();
        let mrp = PruneStrategy::MassRatio(0.5).apply(&ds).unwrap();
        let target = computation_reduction(&ds, &mrp, &qs, &pq).unwrap();
        for kind in [PruneStrategy::VectorNumber(0), PruneStrategy::ListLength(0)] {
            let (s, got) = match_strategy(&ds, &qs, kind, target, 0.5).unwrap();
            assert_eq!(s.short_name(), kind.short_name());
            // Adjacent parameters bracket the target, so the pick is within
            // one step of it.
            let pruned = s.apply(&ds).unwrap();
            assert_eq!(computation_reduction(&ds, &pruned, &qs, &pq).unwrap(), got);
            assert!((got - target).abs() / target < 0.1, "{s}: {got} vs {target}");
        }
        assert!(match_strategy(&ds, &qs, PruneStrategy::MassRatio(0.5), target, 0.5).is_err());
    }

    #[test]
    fn study_rows_follow_mass_ratio() {
        let (ds, qs) = data();
        let gt = compute_ground_truth(&ds, &qs, 10, 2).unwrap();
        let cfg = StudyConfig {
            params: ApproxSearchParams::new(0.5, 50, 10).unwrap(),
            lambda: 1_000,
            threads: 2,
            reorder: true,
        };
        let grid: Vec<PruneStrategy> = [0.3, 0.5, 0.7, 0.9].map(PruneStrategy::MassRatio).to_vec();
        let rows = prune_study(&ds, &qs, &gt, &grid, &cfg).unwrap();
        assert_eq!(rows.len(), 4);
        for w in rows.windows(2) {
            assert!(w[0].index_postings < w[1].index_postings);
            assert!(w[0].computation_reduction > w[1].computation_reduction);
            assert!(w[0].mean_normalized_ip_error >= w[1].mean_normalized_ip_error);
            assert!(w[0].recall <= w[1].recall + 0.02);
        }
        assert_eq!(rows[0].strategy, "mrp:0.3");
        assert!(prune_study(&ds, &qs, &gt, &[], &cfg).is_err());
    }
}
