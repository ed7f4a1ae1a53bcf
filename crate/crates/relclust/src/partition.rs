//! Cluster assignments with cached pair sums, and the error/delta algebra.
//!
//! The central quantity everywhere is the per-cluster self-sum `S_C`: the sum
//! of `d(i, j)` over all *ordered* pairs of members, so every unordered pair
//! counts twice. With that convention the union of two disjoint clusters
//! satisfies `S_{P u Q} = S_P + S_Q + 2 * cross(P, Q)` exactly, which is what
//! lets merges and moves maintain sums incrementally instead of rescanning.

use crate::error::{Error, Result};
use crate::matrix::DissimilarityMatrix;

/// Clusters smaller than this have their cached self-sum recomputed from
/// scratch after shrinking, which bounds drift from repeated subtraction.
pub(crate) const REFRESH_SIZE: usize = 8;

/// Self-sum of the union of two disjoint clusters from their own self-sums
/// and the cross sum between them.
#[inline]
pub fn union_sum(s_p: f64, s_q: f64, cross: f64) -> f64 {
    s_p + s_q + 2.0 * cross
}

/// `true` when `a` and `b` agree within relative tolerance `tol`.
pub(crate) fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// An assignment of `n` objects to `c` non-empty clusters labelled `0..c`,
/// carrying per-cluster sizes and cached self-sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    assignment: Vec<usize>,
    sizes: Vec<usize>,
    self_sums: Vec<f64>,
}

impl Partition {
    /// The all-singletons partition of `n` objects.
    pub fn singletons(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
            sizes: vec![1; n],
            self_sums: vec![0.0; n],
        }
    }

    /// Builds a partition from an explicit assignment, computing all cluster
    /// sums from scratch.
    ///
    /// Labels must be dense: every label in `0..max+1` must be used by at
    /// least one object.
    pub fn from_assignment(d: &DissimilarityMatrix, assignment: Vec<usize>) -> Result<Self> {
        let n = d.n_objects();
        if assignment.len() != n {
            return Err(Error::InvalidParameter { what: "assignment length must equal object count" });
        }
        if n == 0 {
            return Err(Error::InvalidParameter { what: "partition needs at least one object" });
        }
        let c = assignment.iter().max().copied().unwrap_or(0) + 1;
        let mut sizes = vec![0usize; c];
        for &l in &assignment {
            sizes[l] += 1;
        }
        if let Some(label) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyCluster { label });
        }
        let mut self_sums = vec![0.0; c];
        for i in 0..n {
            let row = d.row(i);
            let li = assignment[i];
            let mut acc = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if assignment[j] == li {
                    acc += v;
                }
            }
            self_sums[li] += acc;
        }
        Ok(Self { assignment, sizes, self_sums })
    }

    /// Assembles a partition from already-maintained parts.
    pub(crate) fn from_parts(assignment: Vec<usize>, sizes: Vec<usize>, self_sums: Vec<f64>) -> Self {
        debug_assert_eq!(sizes.len(), self_sums.len());
        debug_assert_eq!(sizes.iter().sum::<usize>(), assignment.len());
        debug_assert!(sizes.iter().all(|&s| s > 0));
        Self { assignment, sizes, self_sums }
    }

    /// Number of objects.
    pub fn n_objects(&self) -> usize {
        self.assignment.len()
    }

    /// Number of clusters.
    pub fn num_clusters(&self) -> usize {
        self.sizes.len()
    }

    /// The cluster label of object `i`.
    #[inline]
    pub fn label_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    /// The full object-to-label assignment.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Member count of the cluster `label`.
    #[inline]
    pub fn cluster_size(&self, label: usize) -> usize {
        self.sizes[label]
    }

    /// Cached self-sum of the cluster `label` (ordered pairs).
    #[inline]
    pub fn cluster_self_sum(&self, label: usize) -> f64 {
        self.self_sums[label]
    }

    /// Members of the cluster `label` in ascending object order.
    pub fn members(&self, label: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// The error measure `E = sum_C S_C / |C|`, from cached sums only.
    pub fn quantization_error(&self) -> f64 {
        self.sizes
            .iter()
            .zip(&self.self_sums)
            .map(|(&size, &sum)| sum / size as f64)
            .sum()
    }

    fn check_live(&self, label: usize) -> Result<()> {
        if label >= self.sizes.len() {
            return Err(Error::DeadLabel { label });
        }
        Ok(())
    }

    /// The exact change of `E` caused by merging clusters `p` and `q`,
    /// given the cross sum between them. The union sum is derived
    /// incrementally, never by rescanning.
    pub fn merge_delta(&self, p: usize, q: usize, cross: f64) -> Result<f64> {
        self.check_live(p)?;
        self.check_live(q)?;
        if p == q {
            return Err(Error::SameCluster { p, q });
        }
        let (np, nq) = (self.sizes[p] as f64, self.sizes[q] as f64);
        let (sp, sq) = (self.self_sums[p], self.self_sums[q]);
        Ok(union_sum(sp, sq, cross) / (np + nq) - sp / np - sq / nq)
    }

    /// The exact change of `E` caused by moving the unit `unit` (a strict
    /// subset of cluster `p`) into cluster `q`.
    pub fn move_delta(
        &self,
        d: &DissimilarityMatrix,
        unit: &[usize],
        p: usize,
        q: usize,
    ) -> Result<f64> {
        Ok(self.move_terms(d, unit, p, q)?.delta)
    }

    /// Applies the move and updates cached sums incrementally, returning the
    /// change of `E`. The shrinking source cluster is refreshed from scratch
    /// once it drops below eight members.
    pub fn apply_move(
        &mut self,
        d: &DissimilarityMatrix,
        unit: &[usize],
        p: usize,
        q: usize,
    ) -> Result<f64> {
        let terms = self.move_terms(d, unit, p, q)?;
        for &i in unit {
            self.assignment[i] = q;
        }
        self.sizes[p] -= unit.len();
        self.sizes[q] += unit.len();
        self.self_sums[p] = terms.remainder_sum;
        self.self_sums[q] = terms.union_sum;
        if self.sizes[p] < REFRESH_SIZE {
            let members = self.members(p);
            self.self_sums[p] = d.cross_sum(&members, &members)?;
        }
        Ok(terms.delta)
    }

    fn move_terms(
        &self,
        d: &DissimilarityMatrix,
        unit: &[usize],
        p: usize,
        q: usize,
    ) -> Result<MoveTerms> {
        self.check_live(p)?;
        self.check_live(q)?;
        if p == q {
            return Err(Error::SameCluster { p, q });
        }
        for &i in unit {
            if i >= self.assignment.len() {
                return Err(Error::IndexOutOfRange { index: i, n: self.assignment.len() });
            }
            if self.assignment[i] != p {
                return Err(Error::UnitNotInSource { object: i, label: p });
            }
        }
        if unit.len() >= self.sizes[p] {
            return Err(Error::WouldEmptySourceCluster { label: p });
        }
        let members_p = self.members(p);
        let members_q = self.members(q);
        let s_u = d.cross_sum(unit, unit)?;
        let x_p = d.cross_sum(unit, &members_p)?;
        let x_q = d.cross_sum(unit, &members_q)?;
        let (np, nq, nu) = (
            self.sizes[p] as f64,
            self.sizes[q] as f64,
            unit.len() as f64,
        );
        let (sp, sq) = (self.self_sums[p], self.self_sums[q]);
        let s_union = union_sum(s_u, sq, x_q);
        let s_rem = sp + s_u - 2.0 * x_p;
        let delta = s_union / (nu + nq) - sq / nq - sp / np + s_rem / (np - nu);
        Ok(MoveTerms { delta, union_sum: s_union, remainder_sum: s_rem })
    }

    /// Recomputes every cluster self-sum from scratch and compares against
    /// the cache within relative tolerance `tol`.
    pub fn verify_sums(&self, d: &DissimilarityMatrix, tol: f64) -> Result<()> {
        let fresh = Self::from_assignment(d, self.assignment.clone())?;
        if fresh.sizes != self.sizes {
            return Err(Error::CheckFailed { context: "cluster sizes disagree with assignment".into() });
        }
        for (label, (&cached, &scratch)) in
            self.self_sums.iter().zip(&fresh.self_sums).enumerate()
        {
            if !rel_close(cached, scratch, tol) {
                return Err(Error::CheckFailed {
                    context: format!(
                        "cached self-sum of cluster {label} is {cached}, from-scratch {scratch}"
                    ),
                });
            }
        }
        Ok(())
    }
}

struct MoveTerms {
    delta: f64,
    union_sum: f64,
    remainder_sum: f64,
}
