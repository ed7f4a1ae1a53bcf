//! Agglomerative hierarchical clustering under the exact error-increase
//! linkage.
//!
//! Merging clusters `P` and `Q` raises the error measure by
//!
//! ```text
//! delta(P, Q) = S_{P u Q} / (|P| + |Q|) - S_P / |P| - S_Q / |Q|
//! ```
//!
//! and both algorithms here repeatedly merge the live pair with the smallest
//! increase. [`naive`] scans every live pair at every step, which is cubic
//! but trivially correct and serves as the oracle. [`fast`] keeps, for each
//! live cluster, a nearest-neighbor candidate together with a lower bound on
//! its minimal linkage, ordered in a priority queue. The queue top is only
//! trusted after verification: a dead candidate or a bound that no longer
//! reproduces bit-for-bit forces a fresh nearest-neighbor scan and a
//! reinsert. Stale queue entries are never purged eagerly, only discarded
//! when dequeued. Verified commits are provably global minima, so both
//! algorithms produce the same dendrogram, tie for tie.
//!
//! Ties are broken everywhere towards the lexicographically smallest
//! `(left, right)` id pair, which makes both algorithms deterministic and
//! lets tests compare them step by step.

use std::collections::BinaryHeap;

use crate::dendrogram::{Dendrogram, MergeStep};
use crate::error::{Error, Result};
use crate::matrix::DissimilarityMatrix;
use crate::par;
use crate::partition::union_sum;

/// Work counters reported by the clustering runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Number of linkage (delta) evaluations performed.
    pub linkage_evaluations: u64,
    /// Number of queue entries that failed verification and were reinserted
    /// with a freshly computed nearest neighbor.
    pub queue_reinserts: u64,
}

/// Cubic-time reference clustering: every step scans all live pairs.
pub fn naive(d: &DissimilarityMatrix) -> Result<Dendrogram> {
    naive_counting(d).map(|(dend, _)| dend)
}

/// Like [`naive`], additionally reporting work counters
/// (`queue_reinserts` is always zero here).
pub fn naive_counting(d: &DissimilarityMatrix) -> Result<(Dendrogram, SearchStats)> {
    let n = d.n_objects();
    if n < 2 {
        return Err(Error::TooFewObjects { n });
    }
    let mut set = ClusterSet::new(d);
    let mut stats = SearchStats::default();
    let mut steps = Vec::with_capacity(n - 1);
    let mut error_after = 0.0;
    for t in 0..n - 1 {
        let (left, right, delta) = set.scan_min_pair();
        stats.linkage_evaluations += set.pair_count();
        let new_id = set.merge(left, right);
        error_after += delta;
        steps.push(MergeStep {
            step: t,
            left,
            right,
            delta_e: delta,
            error_after,
            new_size: set.size(new_id),
        });
    }
    Ok((Dendrogram::from_steps(n, steps), stats))
}

/// Priority-queue clustering with lazily verified nearest-neighbor
/// candidates. Produces a dendrogram identical to [`naive`], usually after
/// far fewer linkage evaluations.
pub fn fast(d: &DissimilarityMatrix) -> Result<(Dendrogram, SearchStats)> {
    fast_impl(d, false)
}

/// Like [`fast`], but every committed merge is confirmed against an
/// exhaustive scan of all live pairs. Cubic again; meant for verification.
pub fn fast_checked(d: &DissimilarityMatrix) -> Result<(Dendrogram, SearchStats)> {
    fast_impl(d, true)
}

fn fast_impl(d: &DissimilarityMatrix, checked: bool) -> Result<(Dendrogram, SearchStats)> {
    let n = d.n_objects();
    if n < 2 {
        return Err(Error::TooFewObjects { n });
    }
    let mut set = ClusterSet::new(d);
    let mut stats = SearchStats::default();

    // Each cluster tracks its best merge partner among clusters with a
    // *larger* id; every unordered pair is owned by its smaller id. Newly
    // created clusters always get the largest id, so the ownership scheme
    // stays consistent across merges.
    let seeds: Vec<Option<(usize, f64)>> = par::map_indexed(n, |i| {
        let mut best: Option<(usize, f64)> = None;
        for j in (i + 1)..n {
            let v = set.linkage_value(i, j);
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((j, v));
            }
        }
        best
    });
    stats.linkage_evaluations += (n * (n - 1) / 2) as u64;

    let mut current: Vec<Option<(usize, f64)>> = vec![None; 2 * n - 1];
    let mut heap: BinaryHeap<QueueEntry> = BinaryHeap::with_capacity(2 * n);
    for (i, seed) in seeds.into_iter().enumerate() {
        if let Some((candidate, bound)) = seed {
            current[i] = Some((candidate, bound));
            heap.push(QueueEntry { bound, cluster: i, candidate });
        }
    }

    let mut steps = Vec::with_capacity(n - 1);
    let mut error_after = 0.0;
    while steps.len() < n - 1 {
        let entry = heap.pop().expect("priority queue exhausted with merges remaining");
        let x = entry.cluster;
        if !set.is_alive(x) {
            continue;
        }
        let Some((candidate, bound)) = current[x] else {
            continue;
        };
        if candidate != entry.candidate || bound.to_bits() != entry.bound.to_bits() {
            // Superseded by a lowered bound; drop the stale copy.
            continue;
        }
        if !set.is_alive(candidate) {
            refresh_candidate(&set, x, &mut current, &mut heap, &mut stats);
            stats.queue_reinserts += 1;
            continue;
        }
        let fresh = set.linkage_value(x, candidate);
        stats.linkage_evaluations += 1;
        if fresh.to_bits() != bound.to_bits() {
            refresh_candidate(&set, x, &mut current, &mut heap, &mut stats);
            stats.queue_reinserts += 1;
            continue;
        }
        if checked {
            confirm_global_minimum(&set, x, candidate, fresh)?;
        }

        let t = steps.len();
        let new_id = set.merge(x, candidate);
        current[x] = None;
        current[candidate] = None;
        error_after += fresh;
        steps.push(MergeStep {
            step: t,
            left: x,
            right: candidate,
            delta_e: fresh,
            error_after,
            new_size: set.size(new_id),
        });

        // One linkage evaluation from the new cluster to every live cluster;
        // any bound it undercuts is lowered to the exact new value.
        let others: Vec<usize> =
            set.live_ids().iter().copied().filter(|&id| id != new_id).collect();
        for other in others {
            let v = set.linkage_value(other, new_id);
            stats.linkage_evaluations += 1;
            let lower = match current[other] {
                None => true,
                Some((_, b)) => b > v,
            };
            if lower {
                current[other] = Some((new_id, v));
                heap.push(QueueEntry { bound: v, cluster: other, candidate: new_id });
            }
        }
    }
    Ok((Dendrogram::from_steps(n, steps), stats))
}

fn refresh_candidate(
    set: &ClusterSet,
    x: usize,
    current: &mut [Option<(usize, f64)>],
    heap: &mut BinaryHeap<QueueEntry>,
    stats: &mut SearchStats,
) {
    let mut best: Option<(usize, f64)> = None;
    for &j in set.live_ids_above(x) {
        let v = set.linkage_value(x, j);
        stats.linkage_evaluations += 1;
        if best.is_none_or(|(_, bv)| v < bv) {
            best = Some((j, v));
        }
    }
    current[x] = best;
    if let Some((candidate, bound)) = best {
        heap.push(QueueEntry { bound, cluster: x, candidate });
    }
}

fn confirm_global_minimum(
    set: &ClusterSet,
    left: usize,
    right: usize,
    value: f64,
) -> Result<()> {
    let live = set.live_ids();
    let mut best: Option<(usize, usize, f64)> = None;
    for (ai, &a) in live.iter().enumerate() {
        for &b in &live[ai + 1..] {
            let v = set.linkage_value(a, b);
            if best.is_none_or(|(_, _, bv)| v < bv) {
                best = Some((a, b, v));
            }
        }
    }
    let (a, b, v) = best.expect("at least one live pair");
    if (a, b) != (left, right) || v.to_bits() != value.to_bits() {
        return Err(Error::CheckFailed {
            context: format!(
                "committed merge ({left},{right}) at {value} but exhaustive scan finds ({a},{b}) at {v}"
            ),
        });
    }
    Ok(())
}

/// Min-order on (bound, cluster, candidate); `BinaryHeap` is a max-heap, so
/// the comparison is reversed.
#[derive(Debug, Clone, Copy)]
struct QueueEntry {
    bound: f64,
    cluster: usize,
    candidate: usize,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.cluster.cmp(&self.cluster))
            .then_with(|| other.candidate.cmp(&self.candidate))
    }
}

/// Live clusters plus the cross-sum bookkeeping shared by both algorithms.
///
/// Cross sums are kept in an `n x n` matrix over *slots*; a merge folds one
/// slot into the other, so memory stays quadratic in the object count while
/// cluster ids keep growing. All sums advance via the incremental union
/// identity, never by rescanning the input matrix.
struct ClusterSet {
    n: usize,
    cross: Vec<f64>,
    slot_of: Vec<usize>,
    id_of: Vec<usize>,
    live: Vec<usize>,
    live_slots: Vec<usize>,
    size: Vec<usize>,
    self_sum: Vec<f64>,
    alive: Vec<bool>,
    next_id: usize,
}

impl ClusterSet {
    fn new(d: &DissimilarityMatrix) -> Self {
        let n = d.n_objects();
        let ids = 2 * n - 1;
        let mut cross = vec![0.0; n * n];
        for i in 0..n {
            cross[i * n..(i + 1) * n].copy_from_slice(d.row(i));
        }
        Self {
            n,
            cross,
            slot_of: (0..ids).map(|i| if i < n { i } else { usize::MAX }).collect(),
            id_of: (0..n).collect(),
            live: (0..n).collect(),
            live_slots: (0..n).collect(),
            size: vec![1; ids],
            self_sum: vec![0.0; ids],
            alive: {
                let mut a = vec![false; ids];
                a[..n].iter_mut().for_each(|x| *x = true);
                a
            },
            next_id: n,
        }
    }

    #[inline]
    fn is_alive(&self, id: usize) -> bool {
        self.alive[id]
    }

    #[inline]
    fn size(&self, id: usize) -> usize {
        self.size[id]
    }

    fn live_ids(&self) -> &[usize] {
        &self.live
    }

    /// Live ids strictly greater than `id` (ascending).
    fn live_ids_above(&self, id: usize) -> &[usize] {
        let pos = match self.live.binary_search(&id) {
            Ok(p) => p + 1,
            Err(p) => p,
        };
        &self.live[pos..]
    }

    /// Number of live unordered pairs.
    fn pair_count(&self) -> u64 {
        let m = self.live.len() as u64;
        m * (m - 1) / 2
    }

    /// The exact merge delta between two live clusters, from cached sums.
    ///
    /// Arguments are canonicalized by id so the floating-point evaluation
    /// order is identical no matter who asks.
    #[inline]
    fn linkage_value(&self, a: usize, b: usize) -> f64 {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let x = self.cross[self.slot_of[lo] * self.n + self.slot_of[hi]];
        let (nl, nh) = (self.size[lo] as f64, self.size[hi] as f64);
        let (sl, sh) = (self.self_sum[lo], self.self_sum[hi]);
        union_sum(sl, sh, x) / (nl + nh) - sl / nl - sh / nh
    }

    /// Scans all live pairs and returns the one with the smallest delta,
    /// ties to the lexicographically smallest id pair. Iterates in slot
    /// order for memory locality; the tie-break is on ids.
    fn scan_min_pair(&self) -> (usize, usize, f64) {
        let mut best: Option<(usize, usize, f64)> = None;
        for (si, &sa) in self.live_slots.iter().enumerate() {
            let ida = self.id_of[sa];
            for &sb in &self.live_slots[si + 1..] {
                let idb = self.id_of[sb];
                let (lo, hi) = if ida < idb { (ida, idb) } else { (idb, ida) };
                let v = self.linkage_value(lo, hi);
                let better = match best {
                    None => true,
                    Some((bl, bh, bv)) => v < bv || (v == bv && (lo, hi) < (bl, bh)),
                };
                if better {
                    best = Some((lo, hi, v));
                }
            }
        }
        best.expect("scan requires at least two live clusters")
    }

    /// Merges two live clusters and returns the id of the new cluster.
    fn merge(&mut self, left: usize, right: usize) -> usize {
        debug_assert!(self.alive[left] && self.alive[right] && left < right);
        let new_id = self.next_id;
        self.next_id += 1;
        let (sl, sr) = (self.slot_of[left], self.slot_of[right]);
        self.self_sum[new_id] =
            union_sum(self.self_sum[left], self.self_sum[right], self.cross[sl * self.n + sr]);
        self.size[new_id] = self.size[left] + self.size[right];
        // Fold the right slot into the left one.
        for &s in &self.live_slots {
            if s == sl || s == sr {
                continue;
            }
            let merged = self.cross[sl * self.n + s] + self.cross[sr * self.n + s];
            self.cross[sl * self.n + s] = merged;
            self.cross[s * self.n + sl] = merged;
        }
        self.alive[left] = false;
        self.alive[right] = false;
        self.alive[new_id] = true;
        self.slot_of[new_id] = sl;
        self.id_of[sl] = new_id;
        remove_sorted(&mut self.live, left);
        remove_sorted(&mut self.live, right);
        self.live.push(new_id);
        remove_sorted(&mut self.live_slots, sr);
        new_id
    }
}

fn remove_sorted(v: &mut Vec<usize>, value: usize) {
    let pos = v.binary_search(&value).expect("value present in sorted list");
    v.remove(pos);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[Vec<f64>]) -> DissimilarityMatrix {
        DissimilarityMatrix::validate(rows, 1e-9).unwrap()
    }

    fn d3() -> DissimilarityMatrix {
        matrix(&[vec![0.0, 1.0, 4.0], vec![1.0, 0.0, 1.0], vec![4.0, 1.0, 0.0]])
    }

    fn d4() -> DissimilarityMatrix {
        matrix(&[
            vec![0.0, 1.0, 25.0, 36.0],
            vec![1.0, 0.0, 16.0, 25.0],
            vec![25.0, 16.0, 0.0, 1.0],
            vec![36.0, 25.0, 1.0, 0.0],
        ])
    }

    fn merges(dend: &Dendrogram) -> Vec<(usize, usize, f64)> {
        dend.steps().iter().map(|s| (s.left, s.right, s.delta_e)).collect()
    }

    #[test]
    fn naive_on_d3_breaks_the_tie_towards_the_smaller_pair() {
        let dend = naive(&d3()).unwrap();
        assert_eq!(merges(&dend), vec![(0, 1, 1.0), (2, 3, 3.0)]);
        assert_eq!(dend.steps()[1].error_after, 4.0);
    }

    #[test]
    fn naive_on_d4_produces_the_expected_steps() {
        let dend = naive(&d4()).unwrap();
        assert_eq!(merges(&dend), vec![(0, 1, 1.0), (2, 3, 1.0), (4, 5, 50.0)]);
        assert_eq!(dend.steps()[2].new_size, 4);
    }

    #[test]
    fn two_objects_merge_at_their_dissimilarity() {
        let d = matrix(&[vec![0.0, 7.5], vec![7.5, 0.0]]);
        let dend = naive(&d).unwrap();
        assert_eq!(merges(&dend), vec![(0, 1, 7.5)]);
        let (fast_dend, _) = fast(&d).unwrap();
        assert_eq!(dend, fast_dend);
    }

    #[test]
    fn too_few_objects_is_rejected() {
        let d = matrix(&[vec![0.0]]);
        assert_eq!(naive(&d).unwrap_err(), Error::TooFewObjects { n: 1 });
        assert_eq!(fast(&d).unwrap_err(), Error::TooFewObjects { n: 1 });
    }

    #[test]
    fn fast_matches_naive_on_the_worked_examples() {
        for d in [d3(), d4()] {
            let reference = naive(&d).unwrap();
            let (dend, _) = fast(&d).unwrap();
            assert_eq!(reference, dend);
            let (checked, _) = fast_checked(&d).unwrap();
            assert_eq!(reference, checked);
        }
    }

    #[test]
    fn all_equal_dissimilarities_still_match_through_tie_breaking() {
        let n = 7;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 2.0 }).collect())
            .collect();
        let d = matrix(&rows);
        let reference = naive(&d).unwrap();
        let (dend, _) = fast_checked(&d).unwrap();
        assert_eq!(reference, dend);
    }

    #[test]
    fn naive_counts_exactly_the_closed_form_number_of_pair_scans() {
        let d = d4();
        let (_, stats) = naive_counting(&d).unwrap();
        // sum over m = 2..=4 of m(m-1)/2 = 1 + 3 + 6
        assert_eq!(stats.linkage_evaluations, 10);
        assert_eq!(stats.queue_reinserts, 0);
    }

    #[test]
    fn error_after_telescopes_to_the_single_cluster_error() {
        let d = d4();
        let dend = naive(&d).unwrap();
        let total = dend.steps().last().unwrap().error_after;
        let whole = dend.cut(1).unwrap();
        assert!(crate::partition::rel_close(total, whole.quantization_error(), 1e-9));
    }

    #[test]
    fn fast_does_at_most_half_the_linkage_work_at_n_200() {
        use rand::{Rng, SeedableRng};
        let n = 200;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut rows = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v: f64 = rng.random_range(0.01..10.0);
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        let d = matrix(&rows);
        let (reference, naive_stats) = naive_counting(&d).unwrap();
        let (dend, fast_stats) = fast(&d).unwrap();
        assert_eq!(reference, dend);
        assert!(
            2 * fast_stats.linkage_evaluations <= naive_stats.linkage_evaluations,
            "fast: {}, naive: {}",
            fast_stats.linkage_evaluations,
            naive_stats.linkage_evaluations
        );
    }
}
