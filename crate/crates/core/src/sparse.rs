//! Sparse vectors, exact inner products and mass-based truncation.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An owned sparse vector: strictly increasing dimensions with non-zero values.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseVector<T> {
    dims: Vec<u32>,
    vals: Vec<T>,
}

/// A borrowed sparse vector, typically one row of a [`crate::SparseDataset`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparseView<'a, T> {
    dims: &'a [u32],
    vals: &'a [T],
}

pub(crate) fn check_entries<T: Scalar>(dims: &[u32], vals: &[T]) -> Result<()> {
    if dims.len() != vals.len() {
        return Err(Error::InvalidVector(format!(
            "{} dims but {} values",
            dims.len(),
            vals.len()
        )));
    }
    if let Some(p) = dims.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::InvalidVector(format!(
            "dims not strictly increasing at position {}",
            p + 1
        )));
    }
    for (p, v) in vals.iter().enumerate() {
        if *v == T::zero() {
            return Err(Error::InvalidVector(format!("zero value at position {p}")));
        }
        if !v.is_finite() {
            return Err(Error::InvalidVector(format!(
                "non-finite value at position {p}"
            )));
        }
    }
    Ok(())
}

impl<T: Scalar> SparseVector<T> {
    pub fn new(dims: Vec<u32>, vals: Vec<T>) -> Result<Self> {
        check_entries(&dims, &vals)?;
        Ok(Self { dims, vals })
    }

    /// Builds a vector from `(dim, value)` pairs in any order. Zero values are
    /// dropped; a repeated dimension is an error.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, T)>) -> Result<Self> {
        let mut pairs: Vec<(u32, T)> = pairs
            .into_iter()
            .filter(|(_, v)| *v != T::zero())
            .collect();
        pairs.sort_by_key(|p| p.0);
        let (dims, vals) = pairs.into_iter().unzip();
        Self::new(dims, vals)
    }

    pub fn empty() -> Self {
        Self {
            dims: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn view(&self) -> SparseView<'_, T> {
        SparseView {
            dims: &self.dims,
            vals: &self.vals,
        }
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn vals(&self) -> &[T] {
        &self.vals
    }

    pub fn nnz(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn into_parts(self) -> (Vec<u32>, Vec<T>) {
        (self.dims, self.vals)
    }
}

impl<'a, T: Scalar> SparseView<'a, T> {
    /// Wraps slices without validation. Callers guarantee the vector invariants.
    pub(crate) fn new_unchecked(dims: &'a [u32], vals: &'a [T]) -> Self {
        Self { dims, vals }
    }

    pub fn dims(&self) -> &'a [u32] {
        self.dims
    }

    pub fn vals(&self) -> &'a [T] {
        self.vals
    }

    pub fn nnz(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, T)> + 'a {
        self.dims.iter().copied().zip(self.vals.iter().copied())
    }

    pub fn to_owned(&self) -> SparseVector<T> {
        SparseVector {
            dims: self.dims.to_vec(),
            vals: self.vals.to_vec(),
        }
    }
}

impl<T> AsRef<SparseVector<T>> for SparseVector<T> {
    fn as_ref(&self) -> &SparseVector<T> {
        self
    }
}

impl<'a, T: Scalar> From<&'a SparseVector<T>> for SparseView<'a, T> {
    fn from(v: &'a SparseVector<T>) -> Self {
        v.view()
    }
}

/// Exact inner product over the common dimensions, accumulated in `f64`.
///
/// Merge traversal over both sorted dimension lists; products are summed in
/// ascending dimension order, so the result is symmetric bit for bit.
pub fn sparse_dot<'a, 'b, T: Scalar>(
    a: impl Into<SparseView<'a, T>>,
    b: impl Into<SparseView<'b, T>>,
) -> f64 {
    let (a, b) = (a.into(), b.into());
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0f64;
    while i < a.dims.len() && j < b.dims.len() {
        match a.dims[i].cmp(&b.dims[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                acc += a.vals[i].to_f64() * b.vals[j].to_f64();
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Number of dimensions present in both vectors.
pub fn common_dims<'a, 'b, T: Scalar>(
    a: impl Into<SparseView<'a, T>>,
    b: impl Into<SparseView<'b, T>>,
) -> usize {
    let (a, b) = (a.into(), b.into());
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.dims.len() && j < b.dims.len() {
        match a.dims[i].cmp(&b.dims[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Sum of absolute values of the stored entries.
pub fn mass<'a, T: Scalar>(x: impl Into<SparseView<'a, T>>) -> f64 {
    x.into().vals.iter().map(|v| v.abs().to_f64()).sum()
}

/// Positions of `x`'s entries ordered by |value| descending, ties by
/// ascending dimension.
pub(crate) fn magnitude_order<T: Scalar>(x: SparseView<'_, T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.nnz()).collect();
    // Positions are already in ascending-dimension order, so a stable sort on
    // magnitude alone yields the dimension tie-break.
    order.sort_by(|&p, &q| {
        x.vals[q]
            .abs()
            .partial_cmp(&x.vals[p].abs())
            .unwrap_or(Ordering::Equal)
    });
    order
}

fn gather_sorted<T: Scalar>(x: SparseView<'_, T>, mut keep: Vec<usize>) -> SparseVector<T> {
    keep.sort_unstable();
    let dims = keep.iter().map(|&p| x.dims[p]).collect();
    let vals = keep.iter().map(|&p| x.vals[p]).collect();
    SparseVector { dims, vals }
}

pub(crate) fn check_ratio(name: &str, ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be in (0, 1], got {ratio}")))
    }
}

/// Shortest largest-magnitude prefix whose cumulative |value| reaches
/// `alpha * mass(x)`, returned in dimension order.
///
/// The total mass used for the threshold is summed in the same descending
/// order as the prefix, and `alpha == 1` keeps every entry.
pub fn alpha_mass_subvector<'a, T: Scalar>(
    x: impl Into<SparseView<'a, T>>,
    alpha: f64,
) -> Result<SparseVector<T>> {
    check_ratio("alpha", alpha)?;
    let x = x.into();
    if x.is_empty() {
        return Ok(SparseVector::empty());
    }
    if alpha >= 1.0 {
        return Ok(x.to_owned());
    }
    let order = magnitude_order(x);
    // Accumulate in the storage type so a threshold hit exactly by the
    // stored values is not lost to widening.
    let mut total = T::zero();
    for &p in &order {
        total += x.vals[p].abs();
    }
    let threshold = T::from_f64_lossy(alpha) * total;
    let mut cum = T::zero();
    let mut r = order.len();
    for (taken, &p) in order.iter().enumerate() {
        cum += x.vals[p].abs();
        if cum >= threshold {
            r = taken + 1;
            break;
        }
    }
    Ok(gather_sorted(x, order[..r].to_vec()))
}

/// The `n` largest-magnitude entries (ties by ascending dimension), in
/// dimension order.
pub fn top_n_by_magnitude<'a, T: Scalar>(x: impl Into<SparseView<'a, T>>, n: usize) -> SparseVector<T> {
    let x = x.into();
    if n >= x.nnz() {
        return x.to_owned();
    }
    let mut order = magnitude_order(x);
    order.truncate(n);
    gather_sorted(x, order)
}

/// Keeps the top `ceil(fraction * nnz)` entries by magnitude.
pub fn top_fraction_by_magnitude<'a, T: Scalar>(
    x: impl Into<SparseView<'a, T>>,
    fraction: f64,
) -> Result<SparseVector<T>> {
    check_ratio("retain fraction", fraction)?;
    let x = x.into();
    let n = (fraction * x.nnz() as f64).ceil() as usize;
    Ok(top_n_by_magnitude(x, n.min(x.nnz())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(pairs: &[(u32, f32)]) -> SparseVector<f32> {
        SparseVector::from_pairs(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn dot_lexical_match_example() {
        let a = sv(&[(0, 0.2), (3, 0.4), (9998, 0.6), (9999, 0.8)]);
        let b = sv(&[(9999, 1.0)]);
        assert!((sparse_dot(&a, &b) - 0.8).abs() < 1e-7);
        assert_eq!(a.nnz(), 4);
    }

    #[test]
    fn dot_disjoint_and_self() {
        assert_eq!(sparse_dot(&sv(&[(1, 1.0)]), &sv(&[(2, 1.0)])), 0.0);
        let a = sv(&[(1, 2.0), (5, 3.0)]);
        assert_eq!(sparse_dot(&a, &a), 13.0);
    }

    #[test]
    fn mass_examples() {
        assert!((mass(&sv(&[(1, 0.5), (2, -0.3), (7, 0.2)])) - 1.0).abs() < 1e-7);
        assert_eq!(mass(&SparseVector::<f32>::empty()), 0.0);
        assert_eq!(mass(&sv(&[(4, 2.0)])), 2.0);
    }

    #[test]
    fn alpha_mass_half() {
        let x = sv(&[(1, 0.5), (2, 0.3), (3, 0.2)]);
        let sub = alpha_mass_subvector(&x, 0.5).unwrap();
        assert_eq!(sub, sv(&[(1, 0.5)]));
    }

    #[test]
    fn alpha_mass_full_is_identity() {
        let x = sv(&[(1, 1.0), (2, 1e-30), (9, -0.25)]);
        assert_eq!(alpha_mass_subvector(&x, 1.0).unwrap(), x);
    }

    #[test]
    fn alpha_mass_empty_and_bad_alpha() {
        let e = SparseVector::<f32>::empty();
        assert!(alpha_mass_subvector(&e, 0.3).unwrap().is_empty());
        assert!(alpha_mass_subvector(&e, 0.0).is_err());
        assert!(alpha_mass_subvector(&e, 1.5).is_err());
    }

    #[test]
    fn alpha_mass_ties_prefer_lower_dim() {
        let x = sv(&[(4, 0.5), (7, 0.5), (9, 0.5)]);
        let sub = alpha_mass_subvector(&x, 0.5).unwrap();
        assert_eq!(sub.dims(), &[4, 7]);
    }

    /// Sort-and-scan oracle: independent of `magnitude_order`.
    fn prefix_oracle(pairs: &[(u32, f32)], alpha: f64) -> Vec<u32> {
        let mut sorted = pairs.to_vec();
        sorted.sort_by(|a, b| {
            b.1.abs()
                .partial_cmp(&a.1.abs())
                .unwrap()
                .then(a.0.cmp(&b.0))
        });
        let prefix: Vec<f64> = sorted
            .iter()
            .scan(0.0f64, |s, p| {
                *s += p.1.abs() as f64;
                Some(*s)
            })
            .collect();
        let total = *prefix.last().unwrap();
        let r = prefix.iter().position(|&c| c >= alpha * total).unwrap() + 1;
        let mut dims: Vec<u32> = sorted[..r].iter().map(|p| p.0).collect();
        dims.sort_unstable();
        dims
    }

    #[test]
    fn alpha_mass_matches_prefix_oracle_on_uniform() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let pairs: Vec<(u32, f32)> = (0..10u32)
                .map(|d| (d * 3 + 1, 1.0 - rng.gen::<f32>()))
                .collect();
            let x = sv(&pairs);
            let sub = alpha_mass_subvector(&x, 0.7).unwrap();
            assert_eq!(sub.dims(), prefix_oracle(&pairs, 0.7).as_slice());
        }
    }

    #[test]
    fn top_fraction_rounds_up() {
        let x = sv(&[(0, 0.1), (1, 0.4), (2, 0.3)]);
        assert_eq!(top_fraction_by_magnitude(&x, 0.5).unwrap().dims(), &[1, 2]);
        assert_eq!(top_fraction_by_magnitude(&x, 1.0).unwrap(), x);
    }

    #[test]
    fn construction_rejects_bad_entries() {
        assert!(SparseVector::new(vec![2, 1], vec![1.0f32, 1.0]).is_err());
        assert!(SparseVector::new(vec![1], vec![0.0f32]).is_err());
        assert!(SparseVector::new(vec![1, 2], vec![1.0f32]).is_err());
        assert!(SparseVector::new(vec![1], vec![f32::NAN]).is_err());
        assert!(SparseVector::from_pairs([(1u32, 1.0f32), (1, 2.0)]).is_err());
    }

    fn arb_vector() -> impl Strategy<Value = SparseVector<f32>> {
        proptest::collection::btree_map(0u32..200, -4.0f32..4.0, 0..40).prop_map(|m| {
            SparseVector::from_pairs(m).unwrap()
        })
    }

    proptest! {
        #[test]
        fn dot_is_symmetric(a in arb_vector(), b in arb_vector()) {
            prop_assert_eq!(sparse_dot(&a, &b).to_bits(), sparse_dot(&b, &a).to_bits());
        }

        #[test]
        fn alpha_mass_is_minimal_prefix(x in arb_vector(), alpha in 0.01f64..1.0) {
            prop_assume!(!x.is_empty());
            let sub = alpha_mass_subvector(&x, alpha).unwrap();
            let total = mass(&x);
            let kept = mass(&sub);
            let tol = 4.0 * f64::EPSILON * total * x.nnz() as f64;
            prop_assert!(kept >= alpha * total - tol);
            if sub.nnz() > 1 {
                let smallest = sub.vals().iter().map(|v| v.abs() as f64).fold(f64::INFINITY, f64::min);
                prop_assert!(kept - smallest < alpha * total + tol);
            }
            // Subset with unchanged values.
            for (d, v) in sub.view().iter() {
                let p = x.dims().binary_search(&d).unwrap();
                prop_assert_eq!(x.vals()[p].to_bits(), v.to_bits());
            }
        }

        #[test]
        fn full_mass_pass_keeps_subvector(x in arb_vector(), alpha in 0.05f64..1.0) {
            let once = alpha_mass_subvector(&x, alpha).unwrap();
            let twice = alpha_mass_subvector(&once, 1.0).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
