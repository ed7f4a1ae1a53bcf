//! Relational k-means: batch k-means working directly on pairwise
//! dissimilarities, with seeded multi-restart.
//!
//! The per-object assignment cost against cluster `Q` is
//!
//! ```text
//! v(i, Q) = S_{{i},Q} / |Q| - S_Q / (2 |Q|^2)
//! ```
//!
//! which reduces to the squared distance to the centroid when the
//! dissimilarity is squared Euclidean. Assignment is synchronous (all
//! objects evaluated against the previous iteration's clusters), ties go to
//! the smallest label, and a cluster emptied by a pass is re-seeded with the
//! object farthest from its own cluster. Everything is deterministic in the
//! seed, independently of how restarts are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::DissimilarityMatrix;
use crate::par;
use crate::partition::Partition;

/// Default iteration cap for [`run`].
pub const DEFAULT_MAX_ITER: usize = 100;

/// Final state of a k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct RkmState {
    /// The final partition.
    pub partition: Partition,
    /// Number of assignment passes that changed at least one label.
    pub iterations: usize,
    /// Whether a full pass went through without changes (as opposed to
    /// stopping at the iteration cap).
    pub converged: bool,
}

/// Best and worst runs over a batch of seeded restarts.
#[derive(Debug, Clone)]
pub struct RestartSummary {
    /// The run with the smallest final error.
    pub best: RkmState,
    /// The run with the largest final error.
    pub worst: RkmState,
    /// Final error of every restart, in restart order.
    pub errors: Vec<f64>,
}

/// The assignment cost of object `i` against cluster `q`.
pub fn object_cluster_dissimilarity(
    d: &DissimilarityMatrix,
    p: &Partition,
    i: usize,
    q: usize,
) -> Result<f64> {
    if q >= p.num_clusters() {
        return Err(Error::DeadLabel { label: q });
    }
    if i >= p.n_objects() {
        return Err(Error::IndexOutOfRange { index: i, n: p.n_objects() });
    }
    let members = p.members(q);
    let cross = d.cross_sum(&[i], &members)?;
    let nq = p.cluster_size(q) as f64;
    Ok(cross / nq - p.cluster_self_sum(q) / (2.0 * nq * nq))
}

/// One synchronous assignment pass against the clusters of `p`, including
/// empty-cluster repair. Returns the new labels and how many objects moved.
pub fn assignment_pass(d: &DissimilarityMatrix, p: &Partition) -> Result<(Vec<usize>, usize)> {
    let n = p.n_objects();
    let k = p.num_clusters();
    let prev = p.assignment();
    // S_Q / (2 |Q|^2) is shared by every object; hoist it.
    let halves: Vec<f64> = (0..k)
        .map(|q| {
            let nq = p.cluster_size(q) as f64;
            p.cluster_self_sum(q) / (2.0 * nq * nq)
        })
        .collect();
    let sizes: Vec<f64> = (0..k).map(|q| p.cluster_size(q) as f64).collect();
    let mut labels = par::map_indexed(n, |i| {
        let row = d.row(i);
        let mut cross = vec![0.0f64; k];
        for (j, &v) in row.iter().enumerate() {
            cross[prev[j]] += v;
        }
        let mut best = 0usize;
        let mut best_v = cross[0] / sizes[0] - halves[0];
        for q in 1..k {
            let v = cross[q] / sizes[q] - halves[q];
            if v < best_v {
                best = q;
                best_v = v;
            }
        }
        best
    });
    let changes = labels.iter().zip(prev).filter(|(a, b)| a != b).count();
    repair_empty_clusters(d, &mut labels, k);
    Ok((labels, changes))
}

/// Re-seeds each empty label (in ascending order) with the object farthest
/// from its own cluster, never draining a cluster below one member.
fn repair_empty_clusters(d: &DissimilarityMatrix, labels: &mut [usize], k: usize) {
    let n = labels.len();
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut sums = vec![0.0f64; k];
        let mut own_cross = vec![0.0f64; n];
        for i in 0..n {
            let row = d.row(i);
            let mut acc = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if labels[j] == labels[i] {
                    acc += v;
                }
            }
            own_cross[i] = acc;
            sums[labels[i]] += acc;
        }
        let mut donor: Option<(f64, usize)> = None;
        for (i, &l) in labels.iter().enumerate() {
            if counts[l] < 2 {
                continue;
            }
            let nl = counts[l] as f64;
            let v = own_cross[i] / nl - sums[l] / (2.0 * nl * nl);
            if donor.is_none_or(|(dv, _)| v > dv) {
                donor = Some((v, i));
            }
        }
        let (_, i) = donor.expect("a cluster with at least two members always exists");
        counts[labels[i]] -= 1;
        labels[i] = empty;
        counts[empty] += 1;
    }
}

/// Runs the alternating assignment/update iteration from `initial` until a
/// pass changes nothing or `max_iter` passes have run.
pub fn run(
    d: &DissimilarityMatrix,
    k: usize,
    initial: Partition,
    max_iter: usize,
) -> Result<RkmState> {
    if initial.num_clusters() != k || initial.n_objects() != d.n_objects() {
        return Err(Error::BadInitialPartition { expected: k, actual: initial.num_clusters() });
    }
    let mut partition = initial;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..max_iter {
        let (labels, changes) = assignment_pass(d, &partition)?;
        if changes == 0 {
            converged = true;
            break;
        }
        iterations += 1;
        partition = Partition::from_assignment(d, labels)?;
    }
    Ok(RkmState { partition, iterations, converged })
}

/// A uniform random assignment of `n` objects to `k` labels, repaired so
/// every label is used, fully determined by `seed`.
pub fn random_partition(d: &DissimilarityMatrix, k: usize, seed: u64) -> Result<Partition> {
    let n = d.n_objects();
    if k == 0 || k > n {
        return Err(Error::BadInitialPartition { expected: k, actual: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let donor = labels
            .iter()
            .position(|&l| counts[l] >= 2)
            .expect("k <= n guarantees a donor");
        counts[labels[donor]] -= 1;
        labels[donor] = empty;
        counts[empty] += 1;
    }
    Partition::from_assignment(d, labels)
}

/// Runs `restarts` seeded k-means restarts and reports the best and worst
/// outcomes. Restart `r` is seeded with `master_seed + r`, so the result is
/// a pure function of `(d, k, restarts, master_seed)`.
pub fn best_of(
    d: &DissimilarityMatrix,
    k: usize,
    restarts: usize,
    master_seed: u64,
) -> Result<RestartSummary> {
    let states: Vec<Result<RkmState>> = (0..restarts).map(|r| restart(d, k, master_seed, r)).collect();
    summarize(states)
}

/// [`best_of`] with restarts fanned out over the rayon pool. Identical
/// results, possibly sooner.
#[cfg(feature = "parallel")]
pub fn par_best_of(
    d: &DissimilarityMatrix,
    k: usize,
    restarts: usize,
    master_seed: u64,
) -> Result<RestartSummary> {
    use rayon::prelude::*;
    let states: Vec<Result<RkmState>> =
        (0..restarts).into_par_iter().map(|r| restart(d, k, master_seed, r)).collect();
    summarize(states)
}

fn restart(d: &DissimilarityMatrix, k: usize, master_seed: u64, r: usize) -> Result<RkmState> {
    let initial = random_partition(d, k, master_seed.wrapping_add(r as u64))?;
    run(d, k, initial, DEFAULT_MAX_ITER)
}

fn summarize(states: Vec<Result<RkmState>>) -> Result<RestartSummary> {
    if states.is_empty() {
        return Err(Error::InvalidParameter { what: "restarts must be at least 1" });
    }
    let states: Vec<RkmState> = states.into_iter().collect::<Result<_>>()?;
    let errors: Vec<f64> = states.iter().map(|s| s.partition.quantization_error()).collect();
    let mut best = 0usize;
    let mut worst = 0usize;
    for (i, &e) in errors.iter().enumerate() {
        if e < errors[best] {
            best = i;
        }
        if e > errors[worst] {
            worst = i;
        }
    }
    Ok(RestartSummary {
        best: states[best].clone(),
        worst: states[worst].clone(),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d4() -> DissimilarityMatrix {
        DissimilarityMatrix::validate(
            &[
                vec![0.0, 1.0, 25.0, 36.0],
                vec![1.0, 0.0, 16.0, 25.0],
                vec![25.0, 16.0, 0.0, 1.0],
                vec![36.0, 25.0, 1.0, 0.0],
            ],
            1e-9,
        )
        .unwrap()
    }

    #[test]
    fn object_cluster_dissimilarity_matches_squared_centroid_distance() {
        let d = d4();
        let p = Partition::from_assignment(&d, vec![0, 0, 1, 1]).unwrap();
        // Object 2 is the line point 5; cluster {0, 1} has centroid 0.5.
        let v = object_cluster_dissimilarity(&d, &p, 2, 0).unwrap();
        assert_eq!(v, 20.25);
    }

    #[test]
    fn own_singleton_dissimilarity_is_zero() {
        let d = d4();
        let p = Partition::singletons(4);
        for i in 0..4 {
            assert_eq!(object_cluster_dissimilarity(&d, &p, i, i).unwrap(), 0.0);
        }
    }

    #[test]
    fn two_point_cluster_member_dissimilarity_is_a_quarter_of_the_pair() {
        let delta = 8.0;
        let d = DissimilarityMatrix::validate(
            &[vec![0.0, delta], vec![delta, 0.0]],
            1e-9,
        )
        .unwrap();
        let p = Partition::from_assignment(&d, vec![0, 0]).unwrap();
        assert_eq!(object_cluster_dissimilarity(&d, &p, 0, 0).unwrap(), delta / 4.0);
    }

    #[test]
    fn dead_label_is_rejected() {
        let d = d4();
        let p = Partition::from_assignment(&d, vec![0, 0, 1, 1]).unwrap();
        assert_eq!(
            object_cluster_dissimilarity(&d, &p, 0, 9).unwrap_err(),
            Error::DeadLabel { label: 9 }
        );
    }

    #[test]
    fn run_converges_from_the_interleaved_start_in_one_changing_pass() {
        let d = d4();
        let initial = Partition::from_assignment(&d, vec![0, 1, 0, 1]).unwrap();
        let state = run(&d, 2, initial, DEFAULT_MAX_ITER).unwrap();
        assert!(state.converged);
        assert_eq!(state.iterations, 1);
        assert_eq!(state.partition.assignment(), &[0, 0, 1, 1]);
        assert_eq!(state.partition.quantization_error(), 2.0);
    }

    #[test]
    fn run_recognizes_a_fixed_point_without_changing_passes() {
        let d = d4();
        let initial = Partition::from_assignment(&d, vec![0, 0, 1, 1]).unwrap();
        let state = run(&d, 2, initial, DEFAULT_MAX_ITER).unwrap();
        assert!(state.converged);
        assert_eq!(state.iterations, 0);
    }

    #[test]
    fn k_equal_to_n_is_immediately_converged_at_zero_error() {
        let d = d4();
        let initial = Partition::singletons(4);
        let state = run(&d, 4, initial, DEFAULT_MAX_ITER).unwrap();
        assert!(state.converged);
        assert_eq!(state.iterations, 0);
        assert_eq!(state.partition.quantization_error(), 0.0);
    }

    #[test]
    fn run_rejects_mismatched_initial_partitions() {
        let d = d4();
        let initial = Partition::from_assignment(&d, vec![0, 0, 1, 1]).unwrap();
        assert_eq!(
            run(&d, 3, initial, DEFAULT_MAX_ITER).unwrap_err(),
            Error::BadInitialPartition { expected: 3, actual: 2 }
        );
    }

    #[test]
    fn single_restart_has_equal_best_and_worst() {
        let d = d4();
        let summary = best_of(&d, 2, 1, 7).unwrap();
        assert_eq!(summary.errors.len(), 1);
        assert_eq!(
            summary.best.partition.quantization_error(),
            summary.worst.partition.quantization_error()
        );
    }

    #[test]
    fn same_master_seed_reproduces_the_error_sequence() {
        let d = d4();
        let a = best_of(&d, 2, 10, 42).unwrap();
        let b = best_of(&d, 2, 10, 42).unwrap();
        assert_eq!(a.errors, b.errors);
    }

    #[test]
    fn twenty_restarts_find_the_global_optimum_on_d4() {
        let d = d4();
        let summary = best_of(&d, 2, 20, 0).unwrap();
        // Exhaustive enumeration of all 7 bipartitions puts the optimum at 2.
        assert_eq!(summary.best.partition.quantization_error(), 2.0);
        assert!(summary.worst.partition.quantization_error() >= 2.0);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_restarts_match_sequential_restarts() {
        let d = d4();
        let seq = best_of(&d, 3, 16, 99).unwrap();
        let par = par_best_of(&d, 3, 16, 99).unwrap();
        assert_eq!(seq.errors, par.errors);
        assert_eq!(seq.best.partition.assignment(), par.best.partition.assignment());
    }

    #[test]
    fn random_partition_uses_every_label() {
        let d = d4();
        for seed in 0..20 {
            let p = random_partition(&d, 3, seed).unwrap();
            assert_eq!(p.num_clusters(), 3);
        }
    }

    #[test]
    fn energy_trajectory_on_general_dissimilarities_is_observable() {
        // On non-Euclidean input the error is not guaranteed monotone, so
        // the trajectory is watched rather than asserted.
        let d = DissimilarityMatrix::validate(
            &[
                vec![0.0, 9.0, 1.0, 8.0, 2.0],
                vec![9.0, 0.0, 7.0, 1.0, 6.0],
                vec![1.0, 7.0, 0.0, 9.0, 1.0],
                vec![8.0, 1.0, 9.0, 0.0, 8.0],
                vec![2.0, 6.0, 1.0, 8.0, 0.0],
            ],
            1e-9,
        )
        .unwrap();
        let mut p = random_partition(&d, 2, 1).unwrap();
        let mut trace = vec![p.quantization_error()];
        for _ in 0..DEFAULT_MAX_ITER {
            let (labels, changes) = assignment_pass(&d, &p).unwrap();
            if changes == 0 {
                break;
            }
            p = Partition::from_assignment(&d, labels).unwrap();
            trace.push(p.quantization_error());
        }
        println!("general-dissimilarity energy trajectory: {trace:?}");
        assert_eq!(p.num_clusters(), 2);
        assert!(trace.len() <= DEFAULT_MAX_ITER + 1);
    }
}
