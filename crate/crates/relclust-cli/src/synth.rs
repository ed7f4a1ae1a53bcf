//! Seeded synthetic instances: Gaussian blobs around well-separated centers,
//! delivered as a squared-Euclidean dissimilarity matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use relclust::DissimilarityMatrix;

use crate::error::{Error, Result};

/// Generates `n` objects around `clusters` centers in `dims` dimensions.
///
/// Centers sit on a jittered lattice with axis spacing `2 * separation` and
/// per-axis jitter of at most `separation / 2`, which guarantees a mutual
/// center distance of at least `separation` without any rejection loop.
/// Objects are assigned to centers round-robin and displaced by isotropic
/// Gaussian noise of scale `spread`. The returned matrix holds squared
/// Euclidean distances; the label vector records the generating cluster of
/// every object. Everything is a pure function of `seed`.
pub fn gen_synthetic(
    n: usize,
    dims: usize,
    clusters: usize,
    spread: f64,
    separation: f64,
    seed: u64,
) -> Result<(DissimilarityMatrix, Vec<usize>)> {
    if n == 0 || dims == 0 || clusters == 0 || clusters > n {
        return Err(Error::BadParameters(format!(
            "need 1 <= clusters <= n and dims >= 1 (n={n}, dims={dims}, clusters={clusters})"
        )));
    }
    if spread.is_nan() || spread < 0.0 || separation.is_nan() || separation < 0.0 {
        return Err(Error::BadParameters(format!(
            "spread and separation must be nonnegative (spread={spread}, separation={separation})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let side = (clusters as f64).powf(1.0 / dims as f64).ceil() as usize;
    let jitter = separation / 2.0;
    let mut centers = Vec::with_capacity(clusters);
    for c in 0..clusters {
        let mut coord = Vec::with_capacity(dims);
        let mut rest = c;
        for _ in 0..dims {
            let cell = (rest % side) as f64;
            rest /= side;
            let offset: f64 = rng.random_range(-jitter..=jitter);
            coord.push(cell * 2.0 * separation + offset);
        }
        centers.push(coord);
    }

    let labels: Vec<usize> = (0..n).map(|i| i % clusters).collect();
    let mut points = Vec::with_capacity(n);
    for &label in &labels {
        let center = &centers[label];
        let mut point = Vec::with_capacity(dims);
        for &c in center {
            let z: f64 = rng.sample(StandardNormal);
            point.push(c + spread * z);
        }
        points.push(point);
    }

    let matrix = DissimilarityMatrix::from_pairwise(n, |i, j| squared_distance(&points[i], &points[j]));
    Ok((matrix, labels))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spread_makes_within_cluster_dissimilarities_zero() {
        let (d, labels) = gen_synthetic(12, 3, 4, 0.0, 5.0, 1).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                if labels[i] == labels[j] {
                    assert_eq!(d.get(i, j), 0.0);
                } else {
                    // Distinct centers are at least `separation` apart.
                    assert!(d.get(i, j) >= 25.0 - 1e-9);
                }
            }
        }
    }

    #[test]
    fn same_seed_reproduces_the_matrix() {
        let (a, la) = gen_synthetic(30, 2, 5, 1.0, 4.0, 99).unwrap();
        let (b, lb) = gen_synthetic(30, 2, 5, 1.0, 4.0, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }

    #[test]
    fn labels_are_round_robin() {
        let (_, labels) = gen_synthetic(7, 1, 3, 0.5, 2.0, 5).unwrap();
        assert_eq!(labels, vec![0, 1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(gen_synthetic(3, 2, 5, 1.0, 1.0, 0).is_err());
        assert!(gen_synthetic(3, 0, 2, 1.0, 1.0, 0).is_err());
        assert!(gen_synthetic(3, 2, 2, -1.0, 1.0, 0).is_err());
    }
}
