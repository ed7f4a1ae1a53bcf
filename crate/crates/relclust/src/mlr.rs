//! Multi-level refinement of a dendrogram cut.
//!
//! A cut at `k` clusters is usually suboptimal: early merge mistakes cannot
//! be undone by later merges. Refinement runs a greedy local search that
//! moves *units* between the `k` target clusters, where a unit is a whole
//! sub-cluster taken from a coarser dendrogram level. Moving dense groups in
//! one step lets the search escape minima that trap single-object moves.
//!
//! Levels are chosen by a geometric schedule: starting from the full object
//! count, each level has roughly `alpha` times the clusters of the previous
//! one, stopping just above the target `k`. Refinement walks the schedule
//! from the coarsest level down to singletons, re-running the greedy sweep
//! to convergence at each level and carrying the refined partition along.
//!
//! All move deltas come from sums aggregated once per level at unit
//! granularity, so a sweep costs `O(units * k)` instead of rescanning the
//! matrix.

use crate::dendrogram::{Dendrogram, Unit};
use crate::error::{Error, Result};
use crate::matrix::DissimilarityMatrix;
use crate::par;
use crate::partition::{rel_close, union_sum, Partition};

/// Default reduction factor for the level schedule.
pub const DEFAULT_ALPHA: f64 = 0.75;

/// Default relative acceptance threshold: a move must improve the error by
/// more than `DEFAULT_EPSILON * max(1, |E|)` to be applied, which keeps
/// float-noise deltas from cycling forever.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Self-sum verification tolerance used by the checked mode.
const CHECK_TOL: f64 = 1e-9;

/// Clusters holding fewer units than this get their sum re-aggregated after
/// shrinking; mirrors the member-count refresh rule of `Partition`.
const REFRESH_UNITS: usize = 8;

/// The decreasing sequence of level sizes used by [`refine`].
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementSchedule {
    alpha: f64,
    target_k: usize,
    level_sizes: Vec<usize>,
}

impl RefinementSchedule {
    /// The reduction factor the schedule was built with.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The cluster count being refined towards.
    pub fn target_k(&self) -> usize {
        self.target_k
    }

    /// Level sizes, strictly decreasing from `n`, all greater than
    /// `target_k`.
    pub fn level_sizes(&self) -> &[usize] {
        &self.level_sizes
    }
}

/// Builds the geometric level schedule for refining towards `target_k`
/// clusters out of `n` objects.
///
/// Sizes follow `s_{m+1} = ceil(alpha * s_m)` starting from `s_1 = n`,
/// stopping before the first size that does not exceed `target_k`. Where the
/// ceiling would repeat a size (possible once `s < 1 / (1 - alpha)`), the
/// size is stepped down by one instead so the sequence stays strictly
/// decreasing.
pub fn select_levels(n: usize, alpha: f64, target_k: usize) -> Result<RefinementSchedule> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::AlphaOutOfRange { alpha });
    }
    if target_k < 1 || target_k >= n {
        return Err(Error::KOutOfRange { k: target_k, n });
    }
    let mut level_sizes = vec![n];
    let mut s = n;
    loop {
        let next = ((alpha * s as f64).ceil() as usize).min(s - 1);
        if next <= target_k {
            break;
        }
        level_sizes.push(next);
        s = next;
    }
    Ok(RefinementSchedule { alpha, target_k, level_sizes })
}

/// A dendrogram level viewed against a target partition: the level's
/// clusters become movable units, each wholly contained in one target
/// cluster.
#[derive(Debug, Clone)]
pub struct LevelView {
    units: Vec<Unit>,
    coarse: Vec<usize>,
    n: usize,
}

impl LevelView {
    /// Assembles a view from level units, checking that the units partition
    /// the objects and that each unit sits inside a single target cluster.
    /// Units are swept in ascending order of their smallest member.
    pub fn from_units(mut units: Vec<Unit>, target: &Partition) -> Result<Self> {
        let n = target.n_objects();
        units.sort_by_key(|u| u.members.iter().min().copied().unwrap_or(usize::MAX));
        let mut seen = vec![false; n];
        let mut coarse = Vec::with_capacity(units.len());
        for unit in &units {
            let Some(&first) = unit.members.first() else {
                return Err(Error::InvalidParameter { what: "level units must be non-empty" });
            };
            let label = target.label_of(first);
            for &i in &unit.members {
                if i >= n || seen[i] {
                    return Err(Error::IndexOutOfRange { index: i, n });
                }
                seen[i] = true;
                if target.label_of(i) != label {
                    return Err(Error::ViewDoesNotRefineTarget { object: i });
                }
            }
            coarse.push(label);
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvalidParameter { what: "level units must cover every object" });
        }
        Ok(Self { units, coarse, n })
    }

    /// The singleton view: every object its own unit.
    pub fn singletons(target: &Partition) -> Self {
        let n = target.n_objects();
        Self {
            units: (0..n).map(|i| Unit { members: vec![i], self_sum: 0.0 }).collect(),
            coarse: target.assignment().to_vec(),
            n,
        }
    }

    /// The units of this view.
    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    /// The target cluster each unit currently belongs to.
    pub fn coarse_assignment(&self) -> &[usize] {
        &self.coarse
    }
}

/// Outcome of a multi-level refinement run.
#[derive(Debug, Clone)]
pub struct Refined {
    /// The refined partition, still with exactly `target_k` clusters.
    pub partition: Partition,
    /// Error measure recorded after each level, coarsest first.
    pub level_errors: Vec<f64>,
    /// Total number of accepted unit moves.
    pub moves: u64,
}

/// Greedy single-level refinement.
///
/// Sweeps units in ascending order of their smallest member; each unit is
/// offered to every other cluster and takes the move with the most negative
/// delta, provided it clears the `epsilon` threshold and does not empty its
/// source cluster. Sweeps repeat until one passes without a move. Returns
/// the refined partition and the number of accepted moves.
pub fn fast_greedy(
    d: &DissimilarityMatrix,
    target: &Partition,
    view: &LevelView,
    epsilon: f64,
) -> Result<(Partition, u64)> {
    greedy_impl(d, target, view, epsilon, false)
}

/// Multi-level refinement of `dend` cut at `target_k`, walking the schedule
/// from the coarsest level down to singletons.
pub fn refine(
    d: &DissimilarityMatrix,
    dend: &Dendrogram,
    target_k: usize,
    alpha: f64,
    epsilon: f64,
) -> Result<Refined> {
    refine_impl(d, dend, target_k, alpha, epsilon, false)
}

/// Like [`refine`], but re-derives every cached sum from the matrix at each
/// level and cross-checks each accepted move against the direct delta
/// formula. Slow; meant for verification.
pub fn refine_checked(
    d: &DissimilarityMatrix,
    dend: &Dendrogram,
    target_k: usize,
    alpha: f64,
    epsilon: f64,
) -> Result<Refined> {
    refine_impl(d, dend, target_k, alpha, epsilon, true)
}

fn refine_impl(
    d: &DissimilarityMatrix,
    dend: &Dendrogram,
    target_k: usize,
    alpha: f64,
    epsilon: f64,
    checked: bool,
) -> Result<Refined> {
    let schedule = select_levels(dend.n_objects(), alpha, target_k)?;
    let mut target = dend.cut(target_k)?;
    let start_error = target.quantization_error();
    let mut level_errors = Vec::with_capacity(schedule.level_sizes().len());
    let mut moves = 0u64;
    for &size in schedule.level_sizes().iter().rev() {
        let units = dend.cut_units(size)?;
        if checked {
            verify_unit_sums(d, &units)?;
        }
        let view = LevelView::from_units(units, &target)?;
        let (refined, level_moves) = greedy_impl(d, &target, &view, epsilon, checked)?;
        target = refined;
        moves += level_moves;
        let e = target.quantization_error();
        if let Some(&prev) = level_errors.last() {
            if e > prev {
                return Err(Error::CheckFailed {
                    context: format!("level error rose from {prev} to {e}"),
                });
            }
        }
        level_errors.push(e);
    }
    if checked {
        target.verify_sums(d, CHECK_TOL)?;
    }
    if target.num_clusters() != target_k {
        return Err(Error::CheckFailed {
            context: format!("refined partition has {} clusters, expected {target_k}", target.num_clusters()),
        });
    }
    if level_errors.last().copied().unwrap_or(start_error) > start_error {
        return Err(Error::CheckFailed { context: "refinement worsened the cut".into() });
    }
    Ok(Refined { partition: target, level_errors, moves })
}

fn greedy_impl(
    d: &DissimilarityMatrix,
    target: &Partition,
    view: &LevelView,
    epsilon: f64,
    checked: bool,
) -> Result<(Partition, u64)> {
    if view.n != target.n_objects() {
        return Err(Error::InvalidParameter { what: "view and target disagree on object count" });
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidParameter { what: "epsilon must be nonnegative" });
    }
    let units = &view.units;
    let u_count = units.len();
    let k = target.num_clusters();
    for (unit, &label) in units.iter().zip(&view.coarse) {
        for &i in &unit.members {
            if target.label_of(i) != label {
                return Err(Error::ViewDoesNotRefineTarget { object: i });
            }
        }
    }

    // Unit-to-unit cross sums; the diagonal carries each unit's own
    // self-sum, so cluster sums are plain block sums of this matrix.
    let y = build_unit_cross(d, units);
    let mut label = view.coarse.clone();
    let mut x = build_unit_to_cluster(&y, &label, u_count, k);
    let mut obj_count: Vec<usize> = (0..k).map(|c| target.cluster_size(c)).collect();
    let mut unit_count = vec![0usize; k];
    for &l in &label {
        unit_count[l] += 1;
    }
    let mut s_c: Vec<f64> = (0..k).map(|c| target.cluster_self_sum(c)).collect();
    let mut e = target.quantization_error();
    let mut assignment = target.assignment().to_vec();

    let mut moves = 0u64;
    loop {
        let mut moved = false;
        for u in 0..u_count {
            let p = label[u];
            if unit_count[p] <= 1 {
                // The unit is its whole cluster; moving it would empty it.
                continue;
            }
            let s_u = y[u * u_count + u];
            let nu = units[u].size() as f64;
            let np = obj_count[p] as f64;
            let sp = s_c[p];
            let remainder = sp + s_u - 2.0 * x[u * k + p];
            let base = remainder / (np - nu) - sp / np;
            let mut best: Option<(f64, usize)> = None;
            for q in 0..k {
                if q == p {
                    continue;
                }
                let nq = obj_count[q] as f64;
                let sq = s_c[q];
                let delta = union_sum(s_u, sq, x[u * k + q]) / (nu + nq) - sq / nq + base;
                if best.is_none_or(|(bd, _)| delta < bd) {
                    best = Some((delta, q));
                }
            }
            let Some((delta, q)) = best else { continue };
            if delta >= -epsilon * e.abs().max(1.0) {
                continue;
            }
            if checked {
                verify_move_delta(d, &assignment, units, u, p, q, delta)?;
            }
            s_c[p] = remainder;
            s_c[q] = union_sum(s_u, s_c[q], x[u * k + q]);
            obj_count[p] -= units[u].size();
            obj_count[q] += units[u].size();
            unit_count[p] -= 1;
            unit_count[q] += 1;
            label[u] = q;
            for v in 0..u_count {
                let yv = y[v * u_count + u];
                x[v * k + p] -= yv;
                x[v * k + q] += yv;
            }
            if unit_count[p] < REFRESH_UNITS {
                s_c[p] = block_sum(&y, &label, u_count, p);
            }
            for &i in &units[u].members {
                assignment[i] = q;
            }
            e += delta;
            moves += 1;
            moved = true;
        }
        if !moved {
            break;
        }
    }

    let result = Partition::from_parts(assignment, obj_count, s_c);
    if checked {
        result.verify_sums(d, CHECK_TOL)?;
        let fresh = result.quantization_error();
        if !rel_close(e, fresh, CHECK_TOL) {
            return Err(Error::CheckFailed {
                context: format!("tracked error {e} drifted from recomputed {fresh}"),
            });
        }
    }
    Ok((result, moves))
}

/// Cross sums between all unit pairs (`units.len()` squared, symmetric);
/// diagonal entries are the units' cached self-sums.
fn build_unit_cross(d: &DissimilarityMatrix, units: &[Unit]) -> Vec<f64> {
    let u_count = units.len();
    let rows = par::map_indexed(u_count, |u| {
        let mut row = vec![0.0; u_count];
        row[u] = units[u].self_sum;
        for (v, slot) in row.iter_mut().enumerate().skip(u + 1) {
            let mut acc = 0.0;
            for &i in &units[u].members {
                let drow = d.row(i);
                for &j in &units[v].members {
                    acc += drow[j];
                }
            }
            *slot = acc;
        }
        row
    });
    let mut y = Vec::with_capacity(u_count * u_count);
    for row in rows {
        y.extend_from_slice(&row);
    }
    for u in 0..u_count {
        for v in 0..u {
            y[u * u_count + v] = y[v * u_count + u];
        }
    }
    y
}

fn build_unit_to_cluster(y: &[f64], label: &[usize], u_count: usize, k: usize) -> Vec<f64> {
    let rows = par::map_indexed(u_count, |u| {
        let mut row = vec![0.0; k];
        for (v, &l) in label.iter().enumerate() {
            row[l] += y[u * u_count + v];
        }
        row
    });
    let mut x = Vec::with_capacity(u_count * k);
    for row in rows {
        x.extend_from_slice(&row);
    }
    x
}

fn block_sum(y: &[f64], label: &[usize], u_count: usize, cluster: usize) -> f64 {
    let mut total = 0.0;
    for u in 0..u_count {
        if label[u] != cluster {
            continue;
        }
        for v in 0..u_count {
            if label[v] == cluster {
                total += y[u * u_count + v];
            }
        }
    }
    total
}

fn verify_unit_sums(d: &DissimilarityMatrix, units: &[Unit]) -> Result<()> {
    for unit in units {
        let scratch = d.cross_sum(&unit.members, &unit.members)?;
        if !rel_close(unit.self_sum, scratch, CHECK_TOL) {
            return Err(Error::CheckFailed {
                context: format!(
                    "unit self-sum {} drifted from from-scratch {scratch}",
                    unit.self_sum
                ),
            });
        }
    }
    Ok(())
}

fn verify_move_delta(
    d: &DissimilarityMatrix,
    assignment: &[usize],
    units: &[Unit],
    u: usize,
    p: usize,
    q: usize,
    delta: f64,
) -> Result<()> {
    let current = Partition::from_assignment(d, assignment.to_vec())?;
    let direct = current.move_delta(d, &units[u].members, p, q)?;
    if !(rel_close(delta, direct, CHECK_TOL) || (delta - direct).abs() <= CHECK_TOL) {
        return Err(Error::CheckFailed {
            context: format!("incremental move delta {delta} disagrees with direct {direct}"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hca;

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
    fn select_levels_examples() {
        assert_eq!(select_levels(8, 0.5, 2).unwrap().level_sizes(), &[8, 4]);
        assert_eq!(
            select_levels(100, 0.75, 5).unwrap().level_sizes(),
            &[100, 75, 57, 43, 33, 25, 19, 15, 12, 9, 7, 6]
        );
        assert_eq!(select_levels(10, 0.9, 9).unwrap().level_sizes(), &[10]);
    }

    #[test]
    fn select_levels_rejects_bad_parameters() {
        assert_eq!(
            select_levels(10, 1.0, 2).unwrap_err(),
            Error::AlphaOutOfRange { alpha: 1.0 }
        );
        assert_eq!(
            select_levels(10, 0.5, 0).unwrap_err(),
            Error::KOutOfRange { k: 0, n: 10 }
        );
        assert_eq!(
            select_levels(10, 0.5, 10).unwrap_err(),
            Error::KOutOfRange { k: 10, n: 10 }
        );
    }

    #[test]
    fn select_levels_never_stalls_near_one() {
        let schedule = select_levels(10, 0.9, 2).unwrap();
        let sizes = schedule.level_sizes();
        assert_eq!(sizes[0], 10);
        assert!(sizes.windows(2).all(|w| w[0] > w[1]));
        assert!(sizes.iter().all(|&s| s > 2));
    }

    #[test]
    fn greedy_leaves_the_optimal_bipartition_alone() {
        let d = d4();
        let target = Partition::from_assignment(&d, vec![0, 0, 1, 1]).unwrap();
        let view = LevelView::singletons(&target);
        let (refined, moves) = fast_greedy(&d, &target, &view, DEFAULT_EPSILON).unwrap();
        assert_eq!(moves, 0);
        assert_eq!(refined.assignment(), target.assignment());
    }

    #[test]
    fn greedy_fixes_the_lopsided_bipartition_in_one_move() {
        let d = d4();
        let target = Partition::from_assignment(&d, vec![0, 0, 0, 1]).unwrap();
        let view = LevelView::singletons(&target);
        let (refined, moves) = fast_greedy(&d, &target, &view, DEFAULT_EPSILON).unwrap();
        assert_eq!(moves, 1);
        assert_eq!(refined.assignment(), &[0, 0, 1, 1]);
        assert_eq!(refined.quantization_error(), 2.0);
    }

    #[test]
    fn greedy_cannot_move_whole_clusters() {
        let d = d4();
        let target = Partition::from_assignment(&d, vec![0, 0, 0, 1]).unwrap();
        let units = vec![
            Unit { members: vec![0, 1, 2], self_sum: d.cross_sum(&[0, 1, 2], &[0, 1, 2]).unwrap() },
            Unit { members: vec![3], self_sum: 0.0 },
        ];
        let view = LevelView::from_units(units, &target).unwrap();
        let (refined, moves) = fast_greedy(&d, &target, &view, DEFAULT_EPSILON).unwrap();
        assert_eq!(moves, 0);
        assert_eq!(refined.assignment(), target.assignment());
    }

    #[test]
    fn view_rejects_units_spanning_clusters() {
        let d = d4();
        let target = Partition::from_assignment(&d, vec![0, 0, 1, 1]).unwrap();
        let units = vec![
            Unit { members: vec![0, 1, 2], self_sum: 0.0 },
            Unit { members: vec![3], self_sum: 0.0 },
        ];
        let err = LevelView::from_units(units, &target).unwrap_err();
        assert_eq!(err, Error::ViewDoesNotRefineTarget { object: 2 });
    }

    #[test]
    fn refine_keeps_the_already_optimal_cut() {
        let d = d4();
        let dend = hca::naive(&d).unwrap();
        for alpha in [0.3, 0.5, 0.75, 0.9] {
            let out = refine_checked(&d, &dend, 2, alpha, DEFAULT_EPSILON).unwrap();
            assert_eq!(out.partition.quantization_error(), 2.0);
            assert_eq!(out.partition.num_clusters(), 2);
            assert!(out.level_errors.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn degenerate_schedule_equals_singleton_greedy() {
        // n = 3, target_k = 2: ceil(alpha * 3) = 2 <= target, so the
        // schedule is just the singleton level.
        let d = DissimilarityMatrix::validate(
            &[vec![0.0, 1.0, 4.0], vec![1.0, 0.0, 1.0], vec![4.0, 1.0, 0.0]],
            1e-9,
        )
        .unwrap();
        let schedule = select_levels(3, 0.5, 2).unwrap();
        assert_eq!(schedule.level_sizes(), &[3]);
        let dend = hca::naive(&d).unwrap();
        let refined = refine(&d, &dend, 2, 0.5, DEFAULT_EPSILON).unwrap();
        let cut = dend.cut(2).unwrap();
        let (greedy, _) = fast_greedy(&d, &cut, &LevelView::singletons(&cut), DEFAULT_EPSILON).unwrap();
        assert_eq!(refined.partition.assignment(), greedy.assignment());
    }
}
