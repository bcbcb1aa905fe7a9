//! Evaluation: exact oracle, recall, benchmarking, window-size sweeps and
//! the window-size memory model.

mod bench;
mod groundtruth;
mod study;
mod sweep;
mod window_model;

pub use bench::{run_bench, BenchConfig, BenchReport, BenchRun};
pub use groundtruth::{
    compute_ground_truth, decode_ground_truth, encode_ground_truth, load_ground_truth,
    save_ground_truth, GroundTruth,
};
pub use study::{match_strategy, prune_study, StudyConfig, StudyRow};
pub use sweep::{sweep_window, SweepReport, SweepRow};
pub use window_model::{fit_window_model, WindowModelFit};

use crate::dataset::SparseDataset;
use crate::index::{Hit, TopKResult};
use crate::scalar::Scalar;
use crate::sparse::{sparse_dot, SparseView};

/// Relative tolerance under which a returned id tying the k-th true score
/// counts as a hit.
pub const TIE_TOLERANCE: f64 = 1e-5;

/// Exact top-`k` by full scan with 64-bit dots, ordered score desc / id asc.
/// `k` larger than the dataset ranks every vector.
pub fn brute_force_topk<'a, T: Scalar>(
    dataset: &SparseDataset<T>,
    q: impl Into<SparseView<'a, T>>,
    k: usize,
) -> TopKResult {
    let q = q.into();
    let hits = dataset
        .rows()
        .enumerate()
        .map(|(i, r)| Hit {
            id: i as u32,
            score: sparse_dot(r, q),
        })
        .collect();
    TopKResult::from_hits(hits, k)
}

/// `|R ∩ R*| / |R*|` over the first `k` entries of both.
pub fn recall(result: &TopKResult, truth_ids: &[u32], k: usize) -> f64 {
    let truth = &truth_ids[..k.min(truth_ids.len())];
    if truth.is_empty() {
        return 1.0;
    }
    let got = &result.entries()[..k.min(result.len())];
    let hits = got.iter().filter(|h| truth.contains(&h.id)).count();
    hits as f64 / truth.len() as f64
}

/// Recall that also accepts a returned id outside `R*` when its exact score
/// (from `exact_score`) ties the k-th true score within [`TIE_TOLERANCE`].
pub fn recall_tie_aware(
    result: &TopKResult,
    truth_ids: &[u32],
    truth_scores: &[f32],
    k: usize,
    exact_score: impl Fn(u32) -> f64,
) -> f64 {
    let kk = k.min(truth_ids.len());
    if kk == 0 {
        return 1.0;
    }
    let truth = &truth_ids[..kk];
    let kth = truth_scores[kk - 1] as f64;
    let got = &result.entries()[..k.min(result.len())];
    let hits = got
        .iter()
        .filter(|h| {
            truth.contains(&h.id)
                || (exact_score(h.id) - kth).abs() <= TIE_TOLERANCE * kth.abs().max(f64::MIN_POSITIVE)
        })
        .count();
    hits.min(kk) as f64 / kk as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::gen_random;
    use crate::test_oracle::worked_example;

    fn result(ids: &[u32]) -> TopKResult {
        TopKResult::from_hits(
            ids.iter()
                .enumerate()
                .map(|(r, &id)| Hit {
                    id,
                    score: 100.0 - r as f64,
                })
                .collect(),
            ids.len(),
        )
    }

    #[test]
    fn worked_example_oracle() {
        let (ds, q) = worked_example();
        let top = brute_force_topk(&ds, &q, 1);
        assert_eq!(top.entries()[0].id, 4);
        assert!((top.entries()[0].score - 36.1).abs() < 1e-5);
        assert_eq!(brute_force_topk(&ds, &q, 100).len(), 9);
    }

    #[test]
    fn oracle_prefixes_agree() {
        let ds: SparseDataset<f32> = gen_random(500, 100, 10, 21).unwrap();
        let q = ds.row(17);
        let all = brute_force_topk(&ds, q, ds.n());
        for k in [1, 5, 50, 499, 500] {
            assert_eq!(brute_force_topk(&ds, q, k).entries(), &all.entries()[..k]);
        }
    }

    #[test]
    fn recall_examples() {
        let truth: Vec<u32> = (0..10).collect();
        assert_eq!(recall(&result(&truth), &truth, 10), 1.0);
        assert_eq!(recall(&result(&[20, 21, 22, 23, 24, 25, 26, 27, 28, 29]), &truth, 10), 0.0);
        assert_eq!(recall(&result(&[0, 1, 2, 3, 4, 25, 26, 27, 28, 29]), &truth, 10), 0.5);
        assert_eq!(recall(&result(&[3, 2]), &truth[..2], 2), 0.0);
    }

    #[test]
    fn tie_forgiveness() {
        let truth = [1u32, 2];
        let scores = [5.0f32, 4.0];
        let got = result(&[1, 9]);
        assert_eq!(recall(&got, &truth, 2), 0.5);
        let tied = |id| if id == 9 { 4.0 + 1e-6 } else { 5.0 };
        assert_eq!(recall_tie_aware(&got, &truth, &scores, 2, tied), 1.0);
        let far = |id| if id == 9 { 3.9 } else { 5.0 };
        assert_eq!(recall_tie_aware(&got, &truth, &scores, 2, far), 0.5);
    }
}
