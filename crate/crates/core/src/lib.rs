//! Exact and approximate maximum inner product search over sparse vectors.
//!
//! The crate is generic over the stored scalar (`f32` or `f64`); aliases for
//! both are provided below.

mod error;
mod io;
mod scalar;

pub mod csr;
pub mod dataset;
pub mod index;
pub mod pruning;
pub mod sparse;
pub mod approx;
pub mod eval;

#[cfg(test)]
mod test_oracle;

pub use approx::{
    build_approx, load_approx, save_approx, search_approx, search_no_reorder, ApproxIndex,
    ApproxScratch, ApproxSearchParams,
};
pub use csr::{decode_csr, encode_csr, load_csr, save_csr};
pub use dataset::{dataset_stats, gen_random, DatasetBuilder, DatasetStats, SparseDataset};
pub use error::{Error, Result};
pub use eval::{
    brute_force_topk, compute_ground_truth, fit_window_model, load_ground_truth, recall,
    run_bench, save_ground_truth, sweep_window, BenchConfig, BenchReport, GroundTruth,
    WindowModelFit,
};
pub use index::{
    build_full, postings_visited, search_full, Hit, InvertedIndex, SearchScratch, TopKResult,
    DEFAULT_LAMBDA,
};
pub use pruning::{computation_reduction, inner_product_error, PruneStrategy};
pub use scalar::Scalar;
pub use sparse::{alpha_mass_subvector, mass, sparse_dot, SparseVector, SparseView};

pub type SparseVectorF32 = SparseVector<f32>;
pub type SparseVectorF64 = SparseVector<f64>;
pub type DatasetF32 = SparseDataset<f32>;
pub type DatasetF64 = SparseDataset<f64>;
pub type IndexF32 = InvertedIndex<f32>;
pub type IndexF64 = InvertedIndex<f64>;
pub type ApproxIndexF32 = ApproxIndex<f32>;
