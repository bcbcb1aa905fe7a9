use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Hit {
    pub id: u32,
    pub score: f64,
}

/// Result ranking: score descending, then id ascending.
pub fn rank_order(a: &Hit, b: &Hit) -> Ordering {
    b.score.total_cmp(&a.score).then(a.id.cmp(&b.id))
}

/// Up to `k` hits ordered by [`rank_order`].
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TopKResult {
    entries: Vec<Hit>,
}

impl TopKResult {
    /// Sorts arbitrary hits into rank order and keeps the best `k`.
    pub fn from_hits(mut hits: Vec<Hit>, k: usize) -> Self {
        if hits.len() > k {
            hits.select_nth_unstable_by(k, rank_order);
            hits.truncate(k);
        }
        hits.sort_unstable_by(rank_order);
        Self { entries: hits }
    }

    pub(crate) fn from_sorted(entries: Vec<Hit>) -> Self {
        debug_assert!(entries
            .windows(2)
            .all(|w| rank_order(&w[0], &w[1]) == Ordering::Less));
        Self { entries }
    }

    pub fn entries(&self) -> &[Hit] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|h| h.id)
    }

    pub fn into_entries(self) -> Vec<Hit> {
        self.entries
    }
}

/// Heap entry ordered so that the worst candidate is the heap maximum:
/// lower score is worse, and among equal scores the higher id is worse.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Candidate<S> {
    pub(crate) score: S,
    pub(crate) id: u32,
}

impl<S: PartialOrd> PartialEq for Candidate<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<S: PartialOrd> Eq for Candidate<S> {}

impl<S: PartialOrd> PartialOrd for Candidate<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: PartialOrd> Ord for Candidate<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .partial_cmp(&self.score)
            .unwrap_or(Ordering::Equal)
            .then(self.id.cmp(&other.id))
    }
}

/// Bounded min-heap with the strict-greater displacement rule: a candidate
/// enters a full heap only if its score strictly exceeds the current minimum.
#[derive(Debug)]
pub(crate) struct BoundedHeap<S> {
    k: usize,
    heap: BinaryHeap<Candidate<S>>,
}

impl<S: PartialOrd + Copy> BoundedHeap<S> {
    pub(crate) fn new() -> Self {
        Self {
            k: 0,
            heap: BinaryHeap::new(),
        }
    }

    pub(crate) fn reset(&mut self, k: usize) {
        self.k = k;
        self.heap.clear();
        self.heap.reserve(k + 1);
    }

    pub(crate) fn is_full(&self) -> bool {
        self.heap.len() >= self.k
    }

    pub(crate) fn min_score(&self) -> Option<S> {
        self.heap.peek().map(|c| c.score)
    }

    #[inline]
    pub(crate) fn offer(&mut self, id: u32, score: S) {
        if self.heap.len() < self.k {
            self.heap.push(Candidate { score, id });
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if score > worst.score {
                *worst = Candidate { score, id };
            }
        }
    }

    /// Drains the heap best-first.
    pub(crate) fn drain_sorted(&mut self, mut f: impl FnMut(Candidate<S>)) {
        let v = std::mem::take(&mut self.heap).into_sorted_vec();
        for c in v {
            f(c);
        }
    }
}
