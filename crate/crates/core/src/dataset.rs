//! CSR sparse datasets, summary statistics and synthetic generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::{SparseVector, SparseView};

/// A collection of sparse vectors in compressed-sparse-row layout. Row `i`
/// is the vector with global id `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseDataset<T> {
    d: usize,
    indptr: Vec<u64>,
    indices: Vec<u32>,
    data: Vec<T>,
}

impl<T: Scalar> SparseDataset<T> {
    /// Validates and wraps CSR arrays.
    pub fn new(d: usize, indptr: Vec<u64>, indices: Vec<u32>, data: Vec<T>) -> Result<Self> {
        let ds = Self {
            d,
            indptr,
            indices,
            data,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn empty(d: usize) -> Self {
        Self {
            d,
            indptr: vec![0],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn from_rows<I, V>(d: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = V>,
        V: AsRef<SparseVector<T>>,
    {
        let mut b = DatasetBuilder::new(d);
        for r in rows {
            b.push(r.as_ref().view())?;
        }
        Ok(b.finish())
    }

    /// Checks every CSR invariant, reporting the first violation by row and offset.
    pub fn validate(&self) -> Result<()> {
        if self.indptr.is_empty() {
            return Err(Error::IndptrInconsistent {
                row: 0,
                detail: "indptr is empty".into(),
            });
        }
        if self.indptr[0] != 0 {
            return Err(Error::IndptrInconsistent {
                row: 0,
                detail: format!("indptr[0] = {}", self.indptr[0]),
            });
        }
        if self.indices.len() != self.data.len() {
            return Err(Error::IndptrInconsistent {
                row: self.n(),
                detail: format!(
                    "{} indices but {} values",
                    self.indices.len(),
                    self.data.len()
                ),
            });
        }
        let nnz = self.indices.len() as u64;
        for row in 0..self.n() {
            let (lo, hi) = (self.indptr[row], self.indptr[row + 1]);
            if hi < lo {
                return Err(Error::IndptrInconsistent {
                    row,
                    detail: format!("indptr decreases from {lo} to {hi}"),
                });
            }
            if hi > nnz {
                return Err(Error::IndptrInconsistent {
                    row,
                    detail: format!("indptr {hi} exceeds nnz {nnz}"),
                });
            }
            for off in lo as usize..hi as usize {
                let idx = self.indices[off];
                if idx as u64 >= self.d as u64 {
                    return Err(Error::IndexOutOfRange {
                        row,
                        offset: off,
                        index: idx as u64,
                        dim: self.d as u64,
                    });
                }
                if off > lo as usize && self.indices[off - 1] >= idx {
                    return Err(Error::UnsortedIndices { row, offset: off });
                }
                let v = self.data[off];
                if v == T::zero() {
                    return Err(Error::ZeroValue { row, offset: off });
                }
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue { row, offset: off });
                }
            }
        }
        if *self.indptr.last().unwrap() != nnz {
            return Err(Error::IndptrInconsistent {
                row: self.n(),
                detail: format!(
                    "indptr[n] = {} but nnz = {nnz}",
                    self.indptr.last().unwrap()
                ),
            });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n() == 0
    }

    pub fn indptr(&self) -> &[u64] {
        &self.indptr
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> SparseView<'_, T> {
        let (lo, hi) = (self.indptr[i] as usize, self.indptr[i + 1] as usize);
        SparseView::new_unchecked(&self.indices[lo..hi], &self.data[lo..hi])
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = SparseView<'_, T>> + '_ {
        (0..self.n()).map(move |i| self.row(i))
    }

    /// Applies `f` to every row, keeping row positions.
    pub fn map_rows<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(SparseView<'_, T>) -> Result<SparseVector<T>>,
    {
        let mut b = DatasetBuilder::with_capacity(self.d, self.n(), self.nnz());
        for r in self.rows() {
            b.push(f(r)?.view())?;
        }
        Ok(b.finish())
    }

    /// Number of postings per dimension (length `d`).
    pub fn column_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.d];
        for &j in &self.indices {
            counts[j as usize] += 1;
        }
        counts
    }

    /// Per-dimension sums of values, accumulated in `f64`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0f64; self.d];
        for (&j, &v) in self.indices.iter().zip(&self.data) {
            sums[j as usize] += v.to_f64();
        }
        sums
    }
}

/// Incremental row-by-row construction of a [`SparseDataset`].
#[derive(Debug)]
pub struct DatasetBuilder<T> {
    d: usize,
    indptr: Vec<u64>,
    indices: Vec<u32>,
    data: Vec<T>,
}

impl<T: Scalar> DatasetBuilder<T> {
    pub fn new(d: usize) -> Self {
        Self::with_capacity(d, 0, 0)
    }

    pub fn with_capacity(d: usize, rows: usize, nnz: usize) -> Self {
        let mut indptr = Vec::with_capacity(rows + 1);
        indptr.push(0);
        Self {
            d,
            indptr,
            indices: Vec::with_capacity(nnz),
            data: Vec::with_capacity(nnz),
        }
    }

    /// Appends a valid row. Dimensions must be below `d`.
    pub fn push(&mut self, row: SparseView<'_, T>) -> Result<()> {
        if let Some(&last) = row.dims().last() {
            if last as u64 >= self.d as u64 {
                return Err(Error::IndexOutOfRange {
                    row: self.indptr.len() - 1,
                    offset: self.indices.len() + row.nnz() - 1,
                    index: last as u64,
                    dim: self.d as u64,
                });
            }
        }
        self.indices.extend_from_slice(row.dims());
        self.data.extend_from_slice(row.vals());
        self.indptr.push(self.indices.len() as u64);
        Ok(())
    }

    pub fn finish(self) -> SparseDataset<T> {
        SparseDataset {
            d: self.d,
            indptr: self.indptr,
            indices: self.indices,
            data: self.data,
        }
    }
}

/// Summary statistics of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetStats {
    pub n: usize,
    pub d: usize,
    pub nnz: usize,
    /// Mean stored entries per vector.
    pub avg_nnz: f64,
    /// Mean postings per dimension, over dimensions with at least one posting.
    pub avg_list_len: f64,
    pub nonempty_dims: usize,
    pub sparsity: f64,
}

pub fn dataset_stats<T: Scalar>(ds: &SparseDataset<T>) -> DatasetStats {
    let n = ds.n();
    let nnz = ds.nnz();
    let counts = ds.column_counts();
    let nonempty_dims = counts.iter().filter(|&&c| c > 0).count();
    let avg_nnz = if n == 0 { 0.0 } else { nnz as f64 / n as f64 };
    let avg_list_len = if nonempty_dims == 0 {
        0.0
    } else {
        nnz as f64 / nonempty_dims as f64
    };
    let cells = n as f64 * ds.d() as f64;
    let sparsity = if cells == 0.0 {
        1.0
    } else {
        1.0 - nnz as f64 / cells
    };
    DatasetStats {
        n,
        d: ds.d(),
        nnz,
        avg_nnz,
        avg_list_len,
        nonempty_dims,
        sparsity,
    }
}

/// Uniform random dataset: every row has exactly `nnz_per_vec` dimensions
/// drawn without replacement and values uniform in (0, 1].
pub fn gen_random<T: Scalar>(
    n: usize,
    d: usize,
    nnz_per_vec: usize,
    seed: u64,
) -> Result<SparseDataset<T>> {
    if nnz_per_vec > d {
        return Err(Error::param(format!(
            "nnz per vector ({nnz_per_vec}) exceeds dimensionality ({d})"
        )));
    }
    if d > u32::MAX as usize + 1 {
        return Err(Error::param(format!("dimensionality {d} exceeds u32 range")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = DatasetBuilder::with_capacity(d, n, n * nnz_per_vec);
    let mut dims: Vec<u32> = Vec::with_capacity(nnz_per_vec);
    let mut vals: Vec<T> = Vec::with_capacity(nnz_per_vec);
    for _ in 0..n {
        dims.clear();
        dims.extend(
            rand::seq::index::sample(&mut rng, d, nnz_per_vec)
                .into_iter()
                .map(|j| j as u32),
        );
        dims.sort_unstable();
        vals.clear();
        // 1 - U[0, 1) lies in (0, 1].
        vals.extend((0..nnz_per_vec).map(|_| T::from_f64_lossy(1.0 - rng.gen::<f64>())));
        b.push(SparseView::new_unchecked(&dims, &vals))?;
    }
    Ok(b.finish())
}
