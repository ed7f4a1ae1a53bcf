//! The error-vs-k benchmark harness: one hierarchical run, then per-k cut,
//! refinement and multi-restart k-means, with timings.

use std::time::Instant;

use relclust::{hca, mlr, rkm, Dendrogram, DissimilarityMatrix};

use crate::error::{Error, Result};

/// One benchmark row.
///
/// `t_hca_ms` is the wall-clock of the single hierarchical run shared by
/// every row; the other timings are per row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub k: usize,
    pub e_hca: f64,
    pub e_mlr: f64,
    pub e_rkm_best: f64,
    pub e_rkm_worst: f64,
    pub t_hca_ms: f64,
    pub t_mlr_ms: f64,
    pub t_rkm_ms: f64,
}

/// Benchmark configuration.
#[derive(Debug, Clone)]
pub struct BenchParams {
    pub k_min: usize,
    pub k_max: usize,
    pub alpha: f64,
    pub restarts: usize,
    pub master_seed: u64,
    /// Verify incremental sums and merge commits from scratch while running.
    pub checked: bool,
}

/// Runs the benchmark sequentially over `k`.
pub fn run(d: &DissimilarityMatrix, params: &BenchParams) -> Result<Vec<BenchRecord>> {
    let (dend, t_hca_ms) = shared_hierarchy(d, params)?;
    (params.k_min..=params.k_max)
        .map(|k| record_for_k(d, &dend, k, params, t_hca_ms))
        .collect()
}

/// Like [`run`], with the per-k work fanned out over the rayon pool.
/// Records come back ordered by `k` regardless of completion order.
#[cfg(feature = "parallel")]
pub fn par_run(d: &DissimilarityMatrix, params: &BenchParams) -> Result<Vec<BenchRecord>> {
    use rayon::prelude::*;
    let (dend, t_hca_ms) = shared_hierarchy(d, params)?;
    (params.k_min..=params.k_max)
        .into_par_iter()
        .map(|k| record_for_k(d, &dend, k, params, t_hca_ms))
        .collect()
}

fn shared_hierarchy(d: &DissimilarityMatrix, params: &BenchParams) -> Result<(Dendrogram, f64)> {
    let n = d.n_objects();
    if params.k_min < 2 || params.k_min > params.k_max || params.k_max >= n {
        return Err(Error::BadParameters(format!(
            "need 2 <= k_min <= k_max < n (k_min={}, k_max={}, n={n})",
            params.k_min, params.k_max
        )));
    }
    if params.restarts == 0 {
        return Err(Error::BadParameters("restarts must be at least 1".into()));
    }
    let start = Instant::now();
    let (dend, _stats) = if params.checked { hca::fast_checked(d)? } else { hca::fast(d)? };
    Ok((dend, start.elapsed().as_secs_f64() * 1e3))
}

fn record_for_k(
    d: &DissimilarityMatrix,
    dend: &Dendrogram,
    k: usize,
    params: &BenchParams,
    t_hca_ms: f64,
) -> Result<BenchRecord> {
    let e_hca = dend.cut(k)?.quantization_error();

    let start = Instant::now();
    let refined = if params.checked {
        mlr::refine_checked(d, dend, k, params.alpha, mlr::DEFAULT_EPSILON)?
    } else {
        mlr::refine(d, dend, k, params.alpha, mlr::DEFAULT_EPSILON)?
    };
    let t_mlr_ms = start.elapsed().as_secs_f64() * 1e3;
    let e_mlr = refined.partition.quantization_error();
    assert!(e_mlr <= e_hca, "refinement worsened k={k}: {e_mlr} > {e_hca}");

    let start = Instant::now();
    let summary = rkm::best_of(d, k, params.restarts, params.master_seed)?;
    let t_rkm_ms = start.elapsed().as_secs_f64() * 1e3;
    if params.checked {
        summary.best.partition.verify_sums(d, 1e-9)?;
    }
    let e_rkm_best = summary.best.partition.quantization_error();
    let e_rkm_worst = summary.worst.partition.quantization_error();
    assert!(e_rkm_best <= e_rkm_worst);

    Ok(BenchRecord { k, e_hca, e_mlr, e_rkm_best, e_rkm_worst, t_hca_ms, t_mlr_ms, t_rkm_ms })
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

    fn params(k_min: usize, k_max: usize) -> BenchParams {
        BenchParams { k_min, k_max, alpha: 0.75, restarts: 20, master_seed: 0, checked: false }
    }

    #[test]
    fn the_two_cluster_row_on_d4_hits_the_known_optimum() {
        let records = run(&d4(), &params(2, 2)).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.k, 2);
        assert_eq!(r.e_hca, 2.0);
        assert_eq!(r.e_mlr, 2.0);
        assert_eq!(r.e_rkm_best, 2.0);
        assert!(r.e_rkm_worst >= 2.0);
    }

    #[test]
    fn the_n_minus_one_row_is_the_smallest_pair_dissimilarity() {
        let d = d4();
        let records = run(&d, &params(3, 3)).unwrap();
        let r = &records[0];
        assert_eq!(r.e_hca, 1.0);
        assert_eq!(r.e_mlr, 1.0);
    }

    #[test]
    fn every_row_keeps_refinement_at_or_below_the_cut() {
        let (d, _) = crate::synth::gen_synthetic(40, 2, 4, 1.0, 4.0, 3).unwrap();
        let records = run(&d, &params(2, 8)).unwrap();
        assert_eq!(records.len(), 7);
        for r in &records {
            assert!(r.e_mlr <= r.e_hca);
            assert!(r.e_rkm_best <= r.e_rkm_worst);
        }
    }

    #[test]
    fn bench_output_is_deterministic() {
        let (d, _) = crate::synth::gen_synthetic(30, 2, 3, 1.0, 4.0, 8).unwrap();
        let a = run(&d, &params(2, 6)).unwrap();
        let b = run(&d, &params(2, 6)).unwrap();
        let strip = |rs: &[BenchRecord]| -> Vec<(usize, f64, f64, f64, f64)> {
            rs.iter().map(|r| (r.k, r.e_hca, r.e_mlr, r.e_rkm_best, r.e_rkm_worst)).collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_runs_agree() {
        let (d, _) = crate::synth::gen_synthetic(30, 2, 3, 1.0, 4.0, 8).unwrap();
        let a = run(&d, &params(2, 6)).unwrap();
        let b = par_run(&d, &params(2, 6)).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.k, x.e_hca, x.e_mlr), (y.k, y.e_hca, y.e_mlr));
            assert_eq!((x.e_rkm_best, x.e_rkm_worst), (y.e_rkm_best, y.e_rkm_worst));
        }
    }

    #[test]
    fn bad_k_ranges_are_rejected() {
        assert!(run(&d4(), &params(2, 4)).is_err());
        assert!(run(&d4(), &params(1, 2)).is_err());
        assert!(run(&d4(), &params(3, 2)).is_err());
    }
}
