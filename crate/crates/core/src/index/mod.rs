//! Full-precision windowed inverted index.
//!
//! Each dimension's posting list stores `(slot, value)` pairs, where the slot
//! is the vector id modulo the window size `lambda`. Lists are split into
//! `sigma = ceil(n / lambda)` windows; a query walks the windows in id order,
//! accumulating products into a distance array of length `lambda` that is
//! shared by all windows.

mod persist;
mod topk;

pub use persist::{decode_index, encode_index, load_index, save_index};
pub use topk::{rank_order, Hit, TopKResult};

pub(crate) use topk::BoundedHeap;

use crate::dataset::SparseDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::SparseView;

/// Window size used when none is given.
pub const DEFAULT_LAMBDA: usize = 100_000;

/// One window of one posting list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PostingWindow<'a, T> {
    pub window: u32,
    /// Local offsets `id mod lambda`, strictly increasing.
    pub slots: &'a [u32],
    pub vals: &'a [T],
}

impl<T> PostingWindow<'_, T> {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvertedIndex<T> {
    n: usize,
    d: usize,
    lambda: usize,
    sigma: usize,
    /// `d + 1` offsets into the window directory.
    list_ptr: Vec<usize>,
    /// Window number of each present (non-empty) window.
    win_ids: Vec<u32>,
    /// Start of each present window in `slots` / `vals`, plus a final sentinel.
    win_starts: Vec<usize>,
    slots: Vec<u32>,
    vals: Vec<T>,
}

/// Builds the value-storing windowed index over `ds`.
///
/// `lambda` larger than the dataset is clamped to `n`.
pub fn build_full<T: Scalar>(ds: &SparseDataset<T>, lambda: usize) -> Result<InvertedIndex<T>> {
    if lambda == 0 {
        return Err(Error::param("window size lambda must be positive"));
    }
    let n = ds.n();
    if n > u32::MAX as usize {
        return Err(Error::param(format!("{n} vectors exceed the u32 id range")));
    }
    let lambda = if n == 0 { lambda } else { lambda.min(n) };
    let sigma = n.div_ceil(lambda);
    let d = ds.d();

    // Counting pass, then scatter ids and values into per-dimension regions.
    let counts = ds.column_counts();
    let mut list_start = Vec::with_capacity(d + 1);
    let mut acc = 0usize;
    list_start.push(0);
    for &c in &counts {
        acc += c as usize;
        list_start.push(acc);
    }
    let nnz = acc;
    let mut cursor = list_start[..d].to_vec();
    let mut ids = vec![0u32; nnz];
    let mut vals = vec![T::zero(); nnz];
    for (i, row) in ds.rows().enumerate() {
        for (j, v) in row.iter() {
            let c = &mut cursor[j as usize];
            ids[*c] = i as u32;
            vals[*c] = v;
            *c += 1;
        }
    }

    // Ids within a list are ascending, so windows are contiguous runs.
    let mut list_ptr = Vec::with_capacity(d + 1);
    let mut win_ids = Vec::new();
    let mut win_starts = Vec::new();
    list_ptr.push(0);
    for j in 0..d {
        let mut current = u32::MAX;
        let start = list_start[j];
        for (i, &id) in ids[start..list_start[j + 1]].iter().enumerate() {
            let w = (id as usize / lambda) as u32;
            if w != current {
                win_ids.push(w);
                win_starts.push(start + i);
                current = w;
            }
        }
        list_ptr.push(win_ids.len());
    }
    win_starts.push(nnz);
    let slots = ids
        .into_iter()
        .map(|i| (i as usize % lambda) as u32)
        .collect();

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

impl<T: Scalar> InvertedIndex<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    pub fn total_postings(&self) -> usize {
        self.slots.len()
    }

    /// Number of postings in dimension `j`'s list (0 for `j >= d`).
    pub fn list_len(&self, j: usize) -> usize {
        if j >= self.d {
            return 0;
        }
        self.win_starts[self.list_ptr[j + 1]] - self.win_starts[self.list_ptr[j]]
    }

    /// Non-empty windows of dimension `j`, in window order.
    pub fn windows(&self, j: usize) -> impl Iterator<Item = PostingWindow<'_, T>> + '_ {
        let range = if j < self.d {
            self.list_ptr[j]..self.list_ptr[j + 1]
        } else {
            0..0
        };
        range.map(move |e| self.window_at(e))
    }

    /// Window `w` of dimension `j`; empty when no vector in that id range has
    /// the dimension.
    pub fn window(&self, j: usize, w: usize) -> PostingWindow<'_, T> {
        if j < self.d {
            let dir = &self.win_ids[self.list_ptr[j]..self.list_ptr[j + 1]];
            if let Ok(p) = dir.binary_search(&(w as u32)) {
                return self.window_at(self.list_ptr[j] + p);
            }
        }
        PostingWindow {
            window: w as u32,
            slots: &[],
            vals: &[],
        }
    }

    fn window_at(&self, e: usize) -> PostingWindow<'_, T> {
        let (lo, hi) = (self.win_starts[e], self.win_starts[e + 1]);
        PostingWindow {
            window: self.win_ids[e],
            slots: &self.slots[lo..hi],
            vals: &self.vals[lo..hi],
        }
    }

    /// Approximate heap footprint of the posting payload in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.slots.len() * (4 + T::BYTES)
            + self.win_ids.len() * 4
            + self.win_starts.len() * std::mem::size_of::<usize>()
            + self.list_ptr.len() * std::mem::size_of::<usize>()
    }
}

/// Exact number of postings a full search over `q` touches: the summed
/// lengths of the lists of `q`'s non-zero dimensions. Independent of `lambda`.
pub fn postings_visited<'a, T: Scalar>(index: &InvertedIndex<T>, q: impl Into<SparseView<'a, T>>) -> u64 {
    q.into()
        .iter()
        .filter(|(_, v)| *v != T::zero())
        .map(|(j, _)| index.list_len(j as usize) as u64)
        .sum()
}

#[derive(Clone, Copy, Debug)]
struct Term<T> {
    cursor: usize,
    end: usize,
    weight: T,
}

/// Per-search working memory: the distance array, the product buffer and
/// the result heap. Reuse one per worker thread.
#[derive(Debug)]
pub struct SearchScratch<T> {
    dist: Vec<T>,
    products: Vec<T>,
    heap: BoundedHeap<T>,
    terms: Vec<Term<T>>,
}

impl<T: Scalar> Default for SearchScratch<T> {
    fn default() -> Self {
        Self {
            dist: Vec::new(),
            products: Vec::new(),
            heap: BoundedHeap::new(),
            terms: Vec::new(),
        }
    }
}

impl<T: Scalar> SearchScratch<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn for_index(index: &InvertedIndex<T>) -> Self {
        let mut s = Self::default();
        s.dist.resize(index.lambda.max(1), T::zero());
        s
    }

    /// True when every distance-array accumulator is zero.
    pub fn is_clean(&self) -> bool {
        self.dist.iter().all(|&a| a == T::zero())
    }

    pub fn dist_len(&self) -> usize {
        self.dist.len()
    }
}

/// Exhaustive top-`k` search over the index.
///
/// Windows are processed in id order. For each window the query's matching
/// sub-lists are multiplied by the query weight into a contiguous product
/// buffer and then scattered into the distance array; the array is then
/// scanned into a bounded min-heap and reset. Vectors with zero score can
/// appear when fewer than `k` vectors share a dimension with `q`.
pub fn search_full<'a, T: Scalar>(
    index: &InvertedIndex<T>,
    q: impl Into<SparseView<'a, T>>,
    k: usize,
    scratch: &mut SearchScratch<T>,
) -> TopKResult {
    let q = q.into();
    if k == 0 || index.n == 0 {
        return TopKResult::default();
    }
    let k = k.min(index.n);
    if scratch.dist.len() < index.lambda {
        scratch.dist.resize(index.lambda, T::zero());
    }
    scratch.terms.clear();
    for (j, weight) in q.iter() {
        let j = j as usize;
        if j >= index.d || weight == T::zero() {
            continue;
        }
        let (cursor, end) = (index.list_ptr[j], index.list_ptr[j + 1]);
        if cursor < end {
            scratch.terms.push(Term {
                cursor,
                end,
                weight,
            });
        }
    }
    scratch.heap.reset(k);

    let SearchScratch {
        dist,
        products,
        heap,
        terms,
    } = scratch;
    let zero = T::zero();

    for w in 0..index.sigma {
        let w32 = w as u32;
        let mut touched = false;
        for term in terms.iter_mut() {
            if term.cursor >= term.end || index.win_ids[term.cursor] != w32 {
                continue;
            }
            let (lo, hi) = (index.win_starts[term.cursor], index.win_starts[term.cursor + 1]);
            term.cursor += 1;
            touched = true;
            let len = hi - lo;
            if products.len() < len {
                products.resize(len, zero);
            }
            let products = &mut products[..len];
            let weight = term.weight;
            // Stage 1: batched products, written sequentially.
            for (p, &v) in products.iter_mut().zip(&index.vals[lo..hi]) {
                *p = weight * v;
            }
            // Stage 2: scatter-accumulate into the window's distance array.
            for (&s, &p) in index.slots[lo..hi].iter().zip(products.iter()) {
                dist[s as usize] += p;
            }
        }

        // An untouched window holds only zeros; they can enter the heap only
        // while it is short or its minimum is negative.
        if !touched && heap.is_full() && heap.min_score().is_some_and(|m| m >= zero) {
            continue;
        }
        let base = w * index.lambda;
        let width = index.lambda.min(index.n - base);
        for (m, a) in dist[..width].iter_mut().enumerate() {
            heap.offer((base + m) as u32, *a);
            *a = zero;
        }
    }

    let mut hits = Vec::with_capacity(k);
    heap.drain_sorted(|c| {
        hits.push(Hit {
            id: c.id,
            score: c.score.to_f64(),
        })
    });
    TopKResult::from_sorted(hits)
}
