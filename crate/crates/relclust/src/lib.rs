//! Clustering for general dissimilarity data by minimizing the extended
//! quantization error
//!
//! ```text
//! E(P) = sum over clusters C of S_C / |C|,   S_C = sum_{i,j in C} d(i,j)
//! ```
//!
//! where `d` is any reflexive, symmetric, nonnegative pairwise measure. For
//! squared Euclidean input this is exactly twice the classical k-means
//! quantization error, so the machinery here generalizes Ward-style
//! clustering to data that only exists as a pairwise matrix.
//!
//! The crate provides three cooperating pieces:
//!
//! * [`hca`] - agglomerative clustering under the exact error-increase
//!   linkage: a cubic reference implementation and a fast priority-queue
//!   variant that lazily verifies nearest-neighbor candidates. Both produce
//!   identical [`Dendrogram`]s.
//! * [`mlr`] - multi-level refinement of a dendrogram cut: greedy moves of
//!   whole sub-clusters over a geometric schedule of levels, escaping local
//!   minima that trap single-object moves.
//! * [`rkm`] - a relational k-means baseline with seeded multi-restart, for
//!   comparing against the hierarchical pipeline.
//!
//! # Example
//!
//! ```
//! use relclust::{hca, mlr, DissimilarityMatrix};
//!
//! // Squared distances of the line points 0, 1, 5, 6.
//! let d = DissimilarityMatrix::validate(
//!     &[
//!         vec![0.0, 1.0, 25.0, 36.0],
//!         vec![1.0, 0.0, 16.0, 25.0],
//!         vec![25.0, 16.0, 0.0, 1.0],
//!         vec![36.0, 25.0, 1.0, 0.0],
//!     ],
//!     1e-9,
//! )
//! .unwrap();
//!
//! let (dendrogram, _stats) = hca::fast(&d).unwrap();
//! let refined = mlr::refine(&d, &dendrogram, 2, mlr::DEFAULT_ALPHA, mlr::DEFAULT_EPSILON).unwrap();
//! assert_eq!(refined.partition.assignment(), &[0, 0, 1, 1]);
//! assert_eq!(refined.partition.quantization_error(), 2.0);
//! ```
//!
//! With the default `parallel` feature, restart batches and the larger
//! aggregation loops fan out over rayon; results are identical to the
//! sequential fallback.

mod dendrogram;
mod error;
mod matrix;
mod par;
mod partition;

pub mod hca;
pub mod mlr;
pub mod rkm;

pub use dendrogram::{Dendrogram, MergeStep, Unit};
pub use error::{Error, Result};
pub use matrix::DissimilarityMatrix;
pub use partition::{union_sum, Partition};
