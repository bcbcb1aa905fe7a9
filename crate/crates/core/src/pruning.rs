//! Construction-time pruning of datasets.
//!
//! Three strategies trade retained postings for accuracy: mass-ratio pruning
//! (per-vector `alpha`-mass subvector), vector-number pruning (per-vector
//! top-`vn` by magnitude) and list pruning (per-dimension top-`l_max`).
//! All of them keep row positions, so ids survive pruning; rows may become
//! empty.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetBuilder, SparseDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::{
    alpha_mass_subvector, check_ratio, top_fraction_by_magnitude, top_n_by_magnitude, SparseVector,
    SparseView,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum PruneStrategy {
    /// Keep the `alpha`-mass subvector of every row.
    MassRatio(f64),
    /// Keep the `l_max` largest-magnitude postings of every dimension.
    ListLength(usize),
    /// Keep the `vn` largest-magnitude entries of every row.
    VectorNumber(usize),
    /// Keep `ceil(fraction * nnz)` largest-magnitude entries of every row.
    /// Used to study error against the retained share of entries.
    RetainFraction(f64),
}

impl PruneStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PruneStrategy::MassRatio(a) => check_ratio("alpha", a),
            PruneStrategy::RetainFraction(f) => check_ratio("retain fraction", f),
            PruneStrategy::ListLength(0) => Err(Error::param("l_max must be at least 1")),
            PruneStrategy::VectorNumber(0) => Err(Error::param("vn must be at least 1")),
            _ => Ok(()),
        }
    }

    /// Whether the strategy works on one vector at a time.
    pub fn is_per_vector(&self) -> bool {
        !matches!(self, PruneStrategy::ListLength(_))
    }

    /// Prunes a single vector. List pruning needs the whole collection and
    /// is rejected here.
    pub fn apply_vector<T: Scalar>(&self, x: SparseView<'_, T>) -> Result<SparseVector<T>> {
        match *self {
            PruneStrategy::MassRatio(a) => alpha_mass_subvector(x, a),
            PruneStrategy::VectorNumber(vn) => {
                self.validate()?;
                Ok(top_n_by_magnitude(x, vn))
            }
            PruneStrategy::RetainFraction(f) => top_fraction_by_magnitude(x, f),
            PruneStrategy::ListLength(_) => Err(Error::param(
                "list pruning operates on a whole dataset, not a single vector",
            )),
        }
    }

    pub fn apply<T: Scalar>(&self, ds: &SparseDataset<T>) -> Result<SparseDataset<T>> {
        self.validate()?;
        match *self {
            PruneStrategy::MassRatio(a) => prune_mass_ratio(ds, a),
            PruneStrategy::VectorNumber(vn) => prune_vector_number(ds, vn),
            PruneStrategy::ListLength(l) => prune_list(ds, l),
            PruneStrategy::RetainFraction(f) => ds.map_rows(|r| top_fraction_by_magnitude(r, f)),
        }
    }

    /// True when the strategy cannot remove anything.
    pub fn is_identity(&self) -> bool {
        matches!(*self, PruneStrategy::MassRatio(a) | PruneStrategy::RetainFraction(a) if a >= 1.0)
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            PruneStrategy::MassRatio(_) => "mrp",
            PruneStrategy::ListLength(_) => "lp",
            PruneStrategy::VectorNumber(_) => "vnp",
            PruneStrategy::RetainFraction(_) => "top",
        }
    }
}

impl fmt::Display for PruneStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PruneStrategy::MassRatio(a) => write!(f, "mrp:{a}"),
            PruneStrategy::ListLength(l) => write!(f, "lp:{l}"),
            PruneStrategy::VectorNumber(v) => write!(f, "vnp:{v}"),
            PruneStrategy::RetainFraction(r) => write!(f, "top:{r}"),
        }
    }
}

/// Parses `mrp:<alpha>`, `lp:<l_max>`, `vnp:<vn>` or `top:<fraction>`.
impl FromStr for PruneStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, param) = s
            .split_once(':')
            .ok_or_else(|| Error::param(format!("strategy '{s}' must look like kind:param")))?;
        let bad = |_| Error::param(format!("bad parameter in strategy '{s}'"));
        let st = match kind.to_ascii_lowercase().as_str() {
            "mrp" | "mass" => PruneStrategy::MassRatio(param.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?),
            "top" | "retain" => PruneStrategy::RetainFraction(param.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?),
            "lp" | "list" => PruneStrategy::ListLength(param.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?),
            "vnp" | "vn" => PruneStrategy::VectorNumber(param.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?),
            other => return Err(Error::param(format!("unknown pruning strategy '{other}'"))),
        };
        st.validate()?;
        Ok(st)
    }
}

/// Mass-ratio pruning: row `i` becomes the `alpha`-mass subvector of `x_i`.
pub fn prune_mass_ratio<T: Scalar>(ds: &SparseDataset<T>, alpha: f64) -> Result<SparseDataset<T>> {
    check_ratio("alpha", alpha)?;
    if alpha >= 1.0 {
        return Ok(ds.clone());
    }
    ds.map_rows(|r| alpha_mass_subvector(r, alpha))
}

/// Vector-number pruning: every row keeps `min(vn, nnz)` largest-magnitude
/// entries, ties broken by ascending dimension.
pub fn prune_vector_number<T: Scalar>(ds: &SparseDataset<T>, vn: usize) -> Result<SparseDataset<T>> {
    PruneStrategy::VectorNumber(vn).validate()?;
    ds.map_rows(|r| Ok(top_n_by_magnitude(r, vn)))
}

/// List pruning: every dimension keeps its `l_max` largest-magnitude
/// postings, ties broken by ascending vector id.
pub fn prune_list<T: Scalar>(ds: &SparseDataset<T>, l_max: usize) -> Result<SparseDataset<T>> {
    PruneStrategy::ListLength(l_max).validate()?;
    let d = ds.d();
    let indices = ds.indices();
    let data = ds.data();

    // Transpose entry offsets by dimension; offsets within a list are in id order.
    let counts = ds.column_counts();
    let mut start = Vec::with_capacity(d + 1);
    start.push(0usize);
    for &c in &counts {
        start.push(start.last().unwrap() + c as usize);
    }
    let mut fill = start[..d].to_vec();
    let mut by_dim = vec![0usize; ds.nnz()];
    for (off, &j) in indices.iter().enumerate() {
        by_dim[fill[j as usize]] = off;
        fill[j as usize] += 1;
    }

    let mut keep = vec![true; ds.nnz()];
    for j in 0..d {
        let list = &mut by_dim[start[j]..start[j + 1]];
        if list.len() <= l_max {
            continue;
        }
        // Stable on magnitude, so equal values keep ascending-id order.
        list.sort_by(|&a, &b| {
            data[b]
                .abs()
                .partial_cmp(&data[a].abs())
                .unwrap_or(Ordering::Equal)
        });
        for &off in &list[l_max..] {
            keep[off] = false;
        }
    }

    let kept = keep.iter().filter(|&&k| k).count();
    let mut b = DatasetBuilder::with_capacity(d, ds.n(), kept);
    let mut dims = Vec::new();
    let mut vals = Vec::new();
    let indptr = ds.indptr();
    for i in 0..ds.n() {
        dims.clear();
        vals.clear();
        for off in indptr[i] as usize..indptr[i + 1] as usize {
            if keep[off] {
                dims.push(indices[off]);
                vals.push(data[off]);
            }
        }
        b.push(SparseView::new_unchecked(&dims, &vals))?;
    }
    Ok(b.finish())
}

fn visited(counts: &[u64], q: SparseView<'_, impl Scalar>) -> u64 {
    q.dims()
        .iter()
        .filter_map(|&j| counts.get(j as usize))
        .sum()
}

/// Mean over queries of `||q|| l - ||q'|| l'`: postings traversed by the
/// query over the original dataset minus postings traversed by the pruned
/// query over the pruned dataset.
pub fn computation_reduction<T: Scalar>(
    dataset: &SparseDataset<T>,
    pruned: &SparseDataset<T>,
    queries: &SparseDataset<T>,
    pruned_queries: &SparseDataset<T>,
) -> Result<f64> {
    if dataset.n() != pruned.n() || dataset.d() != pruned.d() {
        return Err(Error::param("pruned dataset is not aligned with the dataset"));
    }
    if queries.n() != pruned_queries.n() {
        return Err(Error::param("pruned queries are not aligned with the queries"));
    }
    if queries.is_empty() {
        return Ok(0.0);
    }
    let before = dataset.column_counts();
    let after = pruned.column_counts();
    let total: f64 = queries
        .rows()
        .zip(pruned_queries.rows())
        .map(|(q, qp)| visited(&before, q) as f64 - visited(&after, qp) as f64)
        .sum();
    Ok(total / queries.n() as f64)
}

/// Inner-product error of a pruning pair, per query.
#[derive(Clone, Debug, Serialize)]
pub struct InnerProductError {
    /// `eps = sum_i delta(x_i, q) - delta(phi(x_i), phi(q))` per query.
    pub per_query: Vec<f64>,
    /// `eps` divided by `sum_i delta(x_i, q)`; `None` when that sum is zero.
    pub normalized: Vec<Option<f64>>,
    pub mean: f64,
    /// Mean of the defined normalized errors.
    pub mean_normalized: f64,
}

/// Summed inner-product error over the dataset for every query, with
/// `doc_strategy` applied to the dataset and `query_strategy` to the queries.
///
/// Uses linearity: `sum_i delta(x_i, q) = q . colsum(D)`, accumulated in `f64`.
pub fn inner_product_error<T: Scalar>(
    dataset: &SparseDataset<T>,
    queries: &SparseDataset<T>,
    doc_strategy: PruneStrategy,
    query_strategy: PruneStrategy,
) -> Result<InnerProductError> {
    let pruned = doc_strategy.apply(dataset)?;
    let pruned_q = query_strategy.apply(queries)?;
    inner_product_error_pruned(dataset, &pruned, queries, &pruned_q)
}

/// As [`inner_product_error`], for already pruned inputs.
pub fn inner_product_error_pruned<T: Scalar>(
    dataset: &SparseDataset<T>,
    pruned: &SparseDataset<T>,
    queries: &SparseDataset<T>,
    pruned_queries: &SparseDataset<T>,
) -> Result<InnerProductError> {
    if dataset.n() != pruned.n() || queries.n() != pruned_queries.n() {
        return Err(Error::param("pruned inputs are not aligned"));
    }
    let full = dataset.column_sums();
    let cut = pruned.column_sums();
    let project = |sums: &[f64], q: SparseView<'_, T>| -> f64 {
        q.iter()
            .filter_map(|(j, v)| sums.get(j as usize).map(|s| s * v.to_f64()))
            .sum()
    };
    let mut per_query = Vec::with_capacity(queries.n());
    let mut normalized = Vec::with_capacity(queries.n());
    for (q, qp) in queries.rows().zip(pruned_queries.rows()) {
        let exact = project(&full, q);
        let eps = exact - project(&cut, qp);
        per_query.push(eps);
        normalized.push((exact != 0.0).then(|| eps / exact));
    }
    let mean = if per_query.is_empty() {
        0.0
    } else {
        per_query.iter().sum::<f64>() / per_query.len() as f64
    };
    let defined: Vec<f64> = normalized.iter().flatten().copied().collect();
    let mean_normalized = if defined.is_empty() {
        0.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    Ok(InnerProductError {
        per_query,
        normalized,
        mean,
        mean_normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::gen_random;
    use crate::sparse::sparse_dot;

    fn sv(pairs: &[(u32, f32)]) -> SparseVector<f32> {
        SparseVector::from_pairs(pairs.iter().copied()).unwrap()
    }

    /// Three vectors over dimensions 1..=3 on which all three strategies
    /// remove the same three postings for a query touching all three
    /// dimensions: LP(2) drops x2's dimension-1 value, VNP(2) drops x3's
    /// dimension-3 value, MRP(0.7) drops only small entries.
    fn three_vectors() -> (SparseDataset<f32>, SparseDataset<f32>) {
        let ds = SparseDataset::from_rows(
            4,
            [
                sv(&[(1, 0.9), (2, 0.05), (3, 0.05)]),
                sv(&[(1, 0.5), (2, 0.4), (3, 0.1)]),
                sv(&[(1, 0.6), (2, 0.5), (3, 0.5)]),
            ],
        )
        .unwrap();
        let qs = SparseDataset::from_rows(4, [sv(&[(1, 1.0), (2, 1.0), (3, 1.0)])]).unwrap();
        (ds, qs)
    }

    fn has(ds: &SparseDataset<f32>, row: usize, dim: u32) -> bool {
        ds.row(row).dims().contains(&dim)
    }

    #[test]
    fn three_strategies_match_reduction() {
        let (ds, qs) = three_vectors();
        let lp = prune_list(&ds, 2).unwrap();
        let vnp = prune_vector_number(&ds, 2).unwrap();
        let mrp = prune_mass_ratio(&ds, 0.7).unwrap();
        for p in [&lp, &vnp, &mrp] {
            assert_eq!(p.nnz(), 6);
            assert_eq!(computation_reduction(&ds, p, &qs, &qs).unwrap(), 3.0);
        }
        assert!(!has(&lp, 1, 1));
        assert!(!has(&vnp, 2, 3));
        assert!(has(&mrp, 1, 1) && has(&mrp, 2, 3));
        // MRP keeps 1, 2 and 3 entries respectively.
        assert_eq!(mrp.row(0).nnz(), 1);
        assert_eq!(mrp.row(1).nnz(), 2);
        assert_eq!(mrp.row(2).nnz(), 3);
        // Every list is limited to two postings under LP.
        assert!(lp.column_counts().iter().all(|&c| c <= 2));
    }

    #[test]
    fn mass_ratio_has_smallest_error_on_three_vectors() {
        let (ds, qs) = three_vectors();
        let none = PruneStrategy::MassRatio(1.0);
        let err = |s| inner_product_error(&ds, &qs, s, none).unwrap().mean;
        let mrp = err(PruneStrategy::MassRatio(0.7));
        let vnp = err(PruneStrategy::VectorNumber(2));
        let lp = err(PruneStrategy::ListLength(2));
        assert!((mrp - 0.2).abs() < 1e-6);
        assert!((vnp - 0.65).abs() < 1e-6);
        assert!((lp - 0.6).abs() < 1e-6);
        assert!(mrp < lp && mrp < vnp);
    }

    #[test]
    fn identities() {
        let ds: SparseDataset<f32> = gen_random(300, 200, 15, 1).unwrap();
        assert_eq!(prune_mass_ratio(&ds, 1.0).unwrap(), ds);
        assert_eq!(prune_vector_number(&ds, 15).unwrap(), ds);
        let max_list = *ds.column_counts().iter().max().unwrap() as usize;
        assert_eq!(prune_list(&ds, max_list).unwrap(), ds);
        let e = inner_product_error(&ds, &ds, PruneStrategy::MassRatio(1.0), PruneStrategy::MassRatio(1.0)).unwrap();
        assert!(e.per_query.iter().all(|&x| x == 0.0));
        assert_eq!(computation_reduction(&ds, &ds, &ds, &ds).unwrap(), 0.0);
    }

    #[test]
    fn mass_ratio_rows_meet_threshold() {
        let ds: SparseDataset<f32> = gen_random(1_000, 2_000, 40, 2).unwrap();
        let p = prune_mass_ratio(&ds, 0.5).unwrap();
        assert_eq!(p.n(), ds.n());
        for (full, cut) in ds.rows().zip(p.rows()) {
            // Oracle: sort magnitudes descending, scan to the threshold.
            let mut mags: Vec<f64> = full.vals().iter().map(|v| v.abs() as f64).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            let total: f64 = mags.iter().sum();
            let mut cum = 0.0;
            let r = mags
                .iter()
                .position(|m| {
                    cum += m;
                    cum >= 0.5 * total
                })
                .unwrap()
                + 1;
            assert_eq!(cut.nnz(), r);
            let kept: f64 = cut.vals().iter().map(|v| v.abs() as f64).sum();
            assert!(kept >= 0.5 * total - 1e-9);
        }
    }

    #[test]
    fn vector_number_matches_sort_oracle_and_is_idempotent() {
        let ds: SparseDataset<f32> = gen_random(1_000, 500, 30, 3).unwrap();
        let p = prune_vector_number(&ds, 7).unwrap();
        for (full, cut) in ds.rows().zip(p.rows()) {
            let mut pairs: Vec<(u32, f32)> = full.iter().collect();
            pairs.sort_by(|a, b| b.1.abs().partial_cmp(&a.1.abs()).unwrap().then(a.0.cmp(&b.0)));
            let mut want: Vec<u32> = pairs[..7].iter().map(|p| p.0).collect();
            want.sort_unstable();
            assert_eq!(cut.dims(), want.as_slice());
        }
        assert_eq!(prune_vector_number(&p, 7).unwrap(), p);
    }

    #[test]
    fn list_pruning_matches_transpose_oracle() {
        let ds: SparseDataset<f32> = gen_random(1_000, 300, 20, 4).unwrap();
        let l_max = 40;
        let p = prune_list(&ds, l_max).unwrap();
        for j in 0..ds.d() as u32 {
            let mut list: Vec<(u32, f32)> = ds
                .rows()
                .enumerate()
                .filter_map(|(i, r)| r.iter().find(|e| e.0 == j).map(|e| (i as u32, e.1)))
                .collect();
            list.sort_by(|a, b| b.1.abs().partial_cmp(&a.1.abs()).unwrap().then(a.0.cmp(&b.0)));
            list.truncate(l_max);
            let mut want: Vec<u32> = list.iter().map(|e| e.0).collect();
            want.sort_unstable();
            let got: Vec<u32> = p
                .rows()
                .enumerate()
                .filter(|(_, r)| r.dims().contains(&j))
                .map(|(i, _)| i as u32)
                .collect();
            assert_eq!(got, want, "dim {j}");
        }
        assert_eq!(prune_list(&p, l_max).unwrap(), p);
    }

    #[test]
    fn list_pruning_ties_prefer_low_ids() {
        let ds = SparseDataset::from_rows(2, [sv(&[(0, 1.0)]), sv(&[(0, 1.0)]), sv(&[(0, 1.0)])]).unwrap();
        let p = prune_list(&ds, 2).unwrap();
        assert_eq!(p.row(0).nnz() + p.row(1).nnz(), 2);
        assert!(p.row(2).is_empty());
    }

    #[test]
    fn reduction_matches_direct_recount() {
        let ds: SparseDataset<f32> = gen_random(1_000, 400, 25, 5).unwrap();
        let qs: SparseDataset<f32> = gen_random(50, 400, 10, 6).unwrap();
        let p = prune_mass_ratio(&ds, 0.5).unwrap();
        let pq = prune_mass_ratio(&qs, 0.5).unwrap();
        let got = computation_reduction(&ds, &p, &qs, &pq).unwrap();
        let count = |data: &SparseDataset<f32>, q: SparseView<'_, f32>| -> f64 {
            data.rows()
                .map(|r| r.dims().iter().filter(|j| q.dims().contains(j)).count() as f64)
                .sum()
        };
        let want: f64 = qs
            .rows()
            .zip(pq.rows())
            .map(|(q, qp)| count(&ds, q) - count(&p, qp))
            .sum::<f64>()
            / 50.0;
        assert!((got - want).abs() < 1e-9);
        assert!(got > 0.0);
    }

    #[test]
    fn error_matches_pairwise_recomputation_and_is_monotone() {
        let ds: SparseDataset<f32> = gen_random(800, 300, 20, 7).unwrap();
        let qs: SparseDataset<f32> = gen_random(20, 300, 15, 8).unwrap();
        let mut last = f64::INFINITY;
        for step in 1..=9 {
            let alpha = step as f64 / 10.0;
            let s = PruneStrategy::MassRatio(alpha);
            let e = inner_product_error(&ds, &qs, s, s).unwrap();
            let pd = s.apply(&ds).unwrap();
            let pq = s.apply(&qs).unwrap();
            for (qi, (q, qp)) in qs.rows().zip(pq.rows()).enumerate() {
                let direct: f64 = ds
                    .rows()
                    .zip(pd.rows())
                    .map(|(x, xp)| sparse_dot(x, q) - sparse_dot(xp, qp))
                    .sum();
                assert!((e.per_query[qi] - direct).abs() < 1e-9 * direct.abs().max(1.0));
                assert!(e.per_query[qi] >= -1e-9);
            }
            assert!(e.mean <= last + 1e-12);
            last = e.mean;
        }
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("mrp:0.5".parse::<PruneStrategy>().unwrap(), PruneStrategy::MassRatio(0.5));
        assert_eq!("lp:20".parse::<PruneStrategy>().unwrap(), PruneStrategy::ListLength(20));
        assert_eq!("vnp:3".parse::<PruneStrategy>().unwrap(), PruneStrategy::VectorNumber(3));
        assert_eq!("top:0.3".parse::<PruneStrategy>().unwrap(), PruneStrategy::RetainFraction(0.3));
        assert!("mrp:1.5".parse::<PruneStrategy>().is_err());
        assert!("lp:0".parse::<PruneStrategy>().is_err());
        assert!("zzz:1".parse::<PruneStrategy>().is_err());
        assert!("mrp".parse::<PruneStrategy>().is_err());
        let s = PruneStrategy::VectorNumber(9);
        assert_eq!(s.to_string().parse::<PruneStrategy>().unwrap(), s);
    }

    #[test]
    fn list_strategy_rejects_single_vectors() {
        let x = sv(&[(1, 1.0)]);
        assert!(PruneStrategy::ListLength(3).apply_vector(x.view()).is_err());
    }
}
