//! Validated pairwise dissimilarity storage.

use crate::error::{Error, Result};
use crate::par;

/// A validated `n x n` dissimilarity matrix.
///
/// Entries are nonnegative, the diagonal is zero and the matrix is exactly
/// symmetric. No metric structure (triangle inequality) is assumed. The
/// matrix is immutable after construction and can be shared freely across
/// threads.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    n: usize,
    values: Vec<f64>, // row-major, n * n
}

impl DissimilarityMatrix {
    /// Validates a raw square array into a dissimilarity matrix.
    ///
    /// Mirrored entries that differ by at most `tolerance * max_entry` are
    /// symmetrized by averaging; diagonal entries with magnitude at most
    /// `tolerance` are zeroed. Anything worse is an error.
    pub fn validate(raw: &[Vec<f64>], tolerance: f64) -> Result<Self> {
        let n = raw.len();
        for (row, r) in raw.iter().enumerate() {
            if r.len() != n {
                return Err(Error::NotSquare { row, len: r.len(), expected: n });
            }
        }
        let mut max_entry = 0.0f64;
        for (i, r) in raw.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidParameter { what: "matrix entries must be finite" });
                }
                if i == j {
                    if v.abs() > tolerance {
                        return Err(Error::NonzeroDiagonal { i });
                    }
                } else if v < 0.0 {
                    return Err(Error::NegativeEntry { i, j });
                }
                max_entry = max_entry.max(v.abs());
            }
        }
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (raw[i][j], raw[j][i]);
                if (a - b).abs() > tolerance * max_entry {
                    return Err(Error::AsymmetryBeyondTolerance { i, j });
                }
                // Averaging only when the mirrored entries actually differ
                // keeps already-symmetric inputs bit-identical.
                let v = if a == b { a } else { 0.5 * (a + b) };
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(Self { n, values })
    }

    /// Builds a matrix from a symmetric pairwise function.
    ///
    /// `f` is evaluated with ordered arguments `(min(i,j), max(i,j))`, so the
    /// result is exactly symmetric by construction; the diagonal is zero.
    /// `f` must return nonnegative finite values.
    pub fn from_pairwise<F>(n: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync + Send,
    {
        let rows = par::map_indexed(n, |i| {
            let mut row = vec![0.0; n];
            for (j, slot) in row.iter_mut().enumerate() {
                if i != j {
                    let v = f(i.min(j), i.max(j));
                    debug_assert!(v >= 0.0 && v.is_finite());
                    *slot = v;
                }
            }
            row
        });
        let mut values = Vec::with_capacity(n * n);
        for row in rows {
            values.extend_from_slice(&row);
        }
        Self { n, values }
    }

    /// Number of objects.
    pub fn n_objects(&self) -> usize {
        self.n
    }

    /// The dissimilarity between objects `i` and `j`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Row `i` as a slice of length `n`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Sum of `d(i, j)` over all ordered pairs `(i, j)` with `i` in `a` and
    /// `j` in `b`. With `a == b` this is the cluster self-sum, which counts
    /// every unordered pair twice.
    pub fn cross_sum(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        for &i in a.iter().chain(b.iter()) {
            if i >= self.n {
                return Err(Error::IndexOutOfRange { index: i, n: self.n });
            }
        }
        let mut total = 0.0;
        for &i in a {
            let row = self.row(i);
            for &j in b {
                total += row[j];
            }
        }
        Ok(total)
    }
}
