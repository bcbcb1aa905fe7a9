//! Independent reference implementations shared by unit tests.

use std::sync::OnceLock;

use crate::dataset::{gen_random, SparseDataset};
use crate::index::TopKResult;
use crate::sparse::{SparseVector, SparseView};

fn sv(pairs: &[(u32, f32)]) -> SparseVector<f32> {
    SparseVector::from_pairs(pairs.iter().copied()).unwrap()
}

/// Nine vectors whose query walk reproduces the worked example: `q` touches
/// lists 1, 5 and 8; x4 sits first in list 1 and third in list 5 and reaches
/// 17.0, then 31.0, then 36.1.
pub(crate) fn worked_example() -> (SparseDataset<f32>, SparseVector<f32>) {
    let rows = vec![
        sv(&[(0, 1.0), (3, 2.0)]),
        sv(&[(2, 4.0), (9, 1.0)]),
        sv(&[(5, 3.0), (7, 1.0)]),
        sv(&[(5, 2.2), (8, 4.1)]),
        sv(&[(1, 6.8), (2, 5.5), (5, 7.0), (8, 3.4)]),
        sv(&[(4, 3.3)]),
        sv(&[(1, 4.0), (8, 2.0)]),
        sv(&[(8, 6.0)]),
        sv(&[(3, 1.1), (6, 0.7)]),
    ];
    let q = sv(&[(1, 2.5), (5, 2.0), (8, 1.5)]);
    (SparseDataset::from_rows(10, rows).unwrap(), q)
}

/// Brute-force top-k with per-pair 64-bit dots, score desc / id asc.
pub(crate) fn brute_force(ds: &SparseDataset<f32>, q: SparseView<'_, f32>, k: usize) -> Vec<(u32, f64)> {
    let mut all: Vec<(u32, f64)> = ds
        .rows()
        .enumerate()
        .map(|(i, r)| {
            let mut s = 0.0f64;
            for (j, v) in r.iter() {
                if let Ok(p) = q.dims().binary_search(&j) {
                    s += v as f64 * q.vals()[p] as f64;
                }
            }
            (i as u32, s)
        })
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Fraction of `truth` ids present in `got`.
pub(crate) fn overlap(got: &TopKResult, truth: &[(u32, f64)]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hits = truth
        .iter()
        .filter(|t| got.ids().any(|id| id == t.0))
        .count();
    hits as f64 / truth.len() as f64
}

/// 10k x 30k uniform dataset with 150 entries per row and 100 queries with 50.
pub(crate) fn shared_uniform() -> &'static (SparseDataset<f32>, SparseDataset<f32>) {
    static DATA: OnceLock<(SparseDataset<f32>, SparseDataset<f32>)> = OnceLock::new();
    DATA.get_or_init(|| {
        (
            gen_random(10_000, 30_000, 150, 101).unwrap(),
            gen_random(100, 30_000, 50, 102).unwrap(),
        )
    })
}
