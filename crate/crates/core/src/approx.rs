//! Approximate search: an index over a pruned copy of the dataset, searched
//! with a mass-pruned query for a pool of `gamma` candidates that are then
//! re-scored exactly against the original vectors.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csr::{load_csr, save_csr};
use crate::dataset::SparseDataset;
use crate::error::{Error, Result};
use crate::index::{build_full, load_index, save_index, search_full, Hit, InvertedIndex, SearchScratch, TopKResult};
use crate::pruning::PruneStrategy;
use crate::scalar::Scalar;
use crate::sparse::{alpha_mass_subvector, check_ratio, SparseVector, SparseView};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_BETA: f64 = 0.2;
pub const DEFAULT_GAMMA: usize = 500;

const META_FILE: &str = "meta.json";
const INDEX_FILE: &str = "index.bin";
const DATA_FILE: &str = "data.csr";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct ApproxIndex<T> {
    index: InvertedIndex<T>,
    dataset: SparseDataset<T>,
    strategy: PruneStrategy,
}

/// Prunes every row of `dataset` with `strategy` and indexes the result.
/// The original dataset is kept for reordering.
pub fn build_approx<T: Scalar>(
    dataset: SparseDataset<T>,
    lambda: usize,
    strategy: PruneStrategy,
) -> Result<ApproxIndex<T>> {
    let index = if strategy.is_identity() {
        build_full(&dataset, lambda)?
    } else {
        build_full(&strategy.apply(&dataset)?, lambda)?
    };
    Ok(ApproxIndex {
        index,
        dataset,
        strategy,
    })
}

impl<T: Scalar> ApproxIndex<T> {
    pub fn index(&self) -> &InvertedIndex<T> {
        &self.index
    }

    pub fn dataset(&self) -> &SparseDataset<T> {
        &self.dataset
    }

    pub fn strategy(&self) -> PruneStrategy {
        self.strategy
    }

    /// The build ratio when the index was mass-pruned.
    pub fn build_alpha(&self) -> Option<f64> {
        match self.strategy {
            PruneStrategy::MassRatio(a) => Some(a),
            _ => None,
        }
    }

    pub fn lambda(&self) -> usize {
        self.index.lambda()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxSearchParams {
    pub beta: f64,
    pub gamma: usize,
    pub k: usize,
}

impl Default for ApproxSearchParams {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            gamma: DEFAULT_GAMMA,
            k: 10,
        }
    }
}

impl ApproxSearchParams {
    pub fn new(beta: f64, gamma: usize, k: usize) -> Result<Self> {
        let p = Self { beta, gamma, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_ratio("beta", self.beta)?;
        if self.k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if self.gamma < self.k {
            return Err(Error::param(format!(
                "gamma ({}) must be at least k ({})",
                self.gamma, self.k
            )));
        }
        Ok(())
    }
}

/// Working memory for approximate searches; one per worker.
#[derive(Debug)]
pub struct ApproxScratch<T> {
    full: SearchScratch<T>,
    dense: Vec<f64>,
    /// One bit per dimension, set for the query's dimensions.
    mask: Vec<u64>,
}

impl<T: Scalar> Default for ApproxScratch<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ApproxScratch<T> {
    pub fn new() -> Self {
        Self {
            full: SearchScratch::new(),
            dense: Vec::new(),
            mask: Vec::new(),
        }
    }

    pub fn for_index(aidx: &ApproxIndex<T>) -> Self {
        Self {
            full: SearchScratch::for_index(&aidx.index),
            dense: vec![0.0; aidx.dataset.d()],
            mask: vec![0; aidx.dataset.d().div_ceil(64)],
        }
    }
}

fn prune_query<T: Scalar>(q: SparseView<'_, T>, beta: f64) -> Result<SparseVector<T>> {
    alpha_mass_subvector(q, beta)
}

/// Coarse phase: searches the pruned index with the `beta`-mass subvector of
/// `q` for the best `gamma` candidates by approximate score.
pub fn coarse<'a, T: Scalar>(
    aidx: &ApproxIndex<T>,
    q: impl Into<SparseView<'a, T>>,
    beta: f64,
    gamma: usize,
    scratch: &mut ApproxScratch<T>,
) -> Result<TopKResult> {
    let q = q.into();
    Ok(if beta >= 1.0 {
        check_ratio("beta", beta)?;
        search_full(&aidx.index, q, gamma, &mut scratch.full)
    } else {
        let qp = prune_query(q, beta)?;
        search_full(&aidx.index, &qp, gamma, &mut scratch.full)
    })
}

/// Candidates whose rows are requested from memory ahead of scoring.
const PREFETCH_AHEAD: usize = 16;

/// Hints the cache to load `s`; candidate rows are scattered over the
/// dataset, so each one otherwise stalls on memory.
#[inline]
fn prefetch<E>(s: &[E]) {
    #[cfg(target_arch = "x86_64")]
    {
        use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
        let base = s.as_ptr() as *const i8;
        for off in (0..std::mem::size_of_val(s)).step_by(64) {
            // SAFETY: prefetching never dereferences; the address stays
            // within the slice.
            unsafe { _mm_prefetch(base.wrapping_add(off), _MM_HINT_T0) };
        }
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = s;
}

/// Reorder phase: exact 64-bit inner products of every candidate against the
/// original dataset, keeping the best `k` by (score desc, id asc).
pub fn reorder<'a, T: Scalar>(
    aidx: &ApproxIndex<T>,
    q: impl Into<SparseView<'a, T>>,
    candidates: &TopKResult,
    k: usize,
    scratch: &mut ApproxScratch<T>,
) -> TopKResult {
    let q = q.into();
    let d = aidx.dataset.d();
    let ApproxScratch { dense, mask, .. } = scratch;
    if dense.len() < d {
        dense.resize(d, 0.0);
    }
    if mask.len() < d.div_ceil(64) {
        mask.resize(d.div_ceil(64), 0);
    }
    for (j, v) in q.iter() {
        let j = j as usize;
        if j < d {
            dense[j] = v.to_f64();
            mask[j / 64] |= 1 << (j % 64);
        }
    }
    // Rows rarely share many dimensions with the query: the bitmask stays in
    // cache and skips the dense lookups and value loads for the rest. Matched
    // products are summed in ascending dimension order, as in `sparse_dot`.
    let entries = candidates.entries();
    for c in entries.iter().take(PREFETCH_AHEAD) {
        prefetch(aidx.dataset.row(c.id as usize).dims());
    }
    let mut pool = Vec::with_capacity(entries.len());
    for (n, c) in entries.iter().enumerate() {
        if let Some(ahead) = entries.get(n + PREFETCH_AHEAD) {
            prefetch(aidx.dataset.row(ahead.id as usize).dims());
        }
        let row = aidx.dataset.row(c.id as usize);
        let (dims, vals) = (row.dims(), row.vals());
        let mut score = 0.0f64;
        for (p, &j) in dims.iter().enumerate() {
            let j = j as usize;
            if mask[j / 64] & (1 << (j % 64)) != 0 {
                score += vals[p].to_f64() * dense[j];
            }
        }
        pool.push(Hit { id: c.id, score });
    }
    for &j in q.dims() {
        let j = j as usize;
        if j < d {
            dense[j] = 0.0;
            mask[j / 64] = 0;
        }
    }
    TopKResult::from_hits(pool, k)
}

/// Full approximate search: coarse pool of `gamma`, then exact reordering.
/// Returned scores are exact inner products with the original vectors.
pub fn search_approx<'a, T: Scalar>(
    aidx: &ApproxIndex<T>,
    q: impl Into<SparseView<'a, T>>,
    params: &ApproxSearchParams,
    scratch: &mut ApproxScratch<T>,
) -> Result<TopKResult> {
    params.validate()?;
    let q = q.into();
    let pool = coarse(aidx, q, params.beta, params.gamma, scratch)?;
    Ok(reorder(aidx, q, &pool, params.k, scratch))
}

/// The coarse top-`k` with approximate scores from the pruned index.
pub fn search_no_reorder<'a, T: Scalar>(
    aidx: &ApproxIndex<T>,
    q: impl Into<SparseView<'a, T>>,
    beta: f64,
    k: usize,
    scratch: &mut ApproxScratch<T>,
) -> Result<TopKResult> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    coarse(aidx, q, beta, k, scratch)
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    scalar: String,
    n: usize,
    d: usize,
    lambda: usize,
    strategy: PruneStrategy,
}

/// Writes `index.bin`, `data.csr` and `meta.json` into `dir`, creating it
/// when missing.
pub fn save_approx<T: Scalar>(aidx: &ApproxIndex<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_index(&aidx.index, dir.join(INDEX_FILE))?;
    save_csr(&aidx.dataset, dir.join(DATA_FILE))?;
    let meta = Meta {
        format_version: FORMAT_VERSION,
        scalar: T::NAME.to_string(),
        n: aidx.dataset.n(),
        d: aidx.dataset.d(),
        lambda: aidx.index.lambda(),
        strategy: aidx.strategy,
    };
    let json = serde_json::to_vec_pretty(&meta).map_err(|e| Error::Metadata(e.to_string()))?;
    let path = dir.join(META_FILE);
    fs::write(&path, json).map_err(|e| Error::io(path, e))
}

pub fn load_approx<T: Scalar>(dir: impl AsRef<Path>) -> Result<ApproxIndex<T>> {
    let dir = dir.as_ref();
    let path = dir.join(META_FILE);
    let raw = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let meta: Meta = serde_json::from_slice(&raw).map_err(|e| Error::Metadata(e.to_string()))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Metadata(format!(
            "unsupported format version {}",
            meta.format_version
        )));
    }
    if meta.scalar != T::NAME {
        return Err(Error::Metadata(format!(
            "index stores {} values, expected {}",
            meta.scalar,
            T::NAME
        )));
    }
    meta.strategy.validate()?;
    let index: InvertedIndex<T> = load_index(dir.join(INDEX_FILE))?;
    let dataset: SparseDataset<T> = load_csr(dir.join(DATA_FILE))?;
    if index.n() != dataset.n()
        || index.d() != dataset.d()
        || meta.n != dataset.n()
        || meta.d != dataset.d()
        || meta.lambda != index.lambda()
    {
        return Err(Error::Metadata(format!(
            "index ({} x {}, lambda {}), dataset ({} x {}) and metadata ({} x {}, lambda {}) disagree",
            index.n(),
            index.d(),
            index.lambda(),
            dataset.n(),
            dataset.d(),
            meta.n,
            meta.d,
            meta.lambda
        )));
    }
    Ok(ApproxIndex {
        index,
        dataset,
        strategy: meta.strategy,
    })
}
