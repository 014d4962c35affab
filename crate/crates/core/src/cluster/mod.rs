//! K-means clustering of embedding views, intrinsic cluster metrics, and
//! annotation packets for cluster-quality judgments.

mod metrics;
mod packets;

pub use metrics::{calinski_harabasz, davies_bouldin, evaluate, silhouette, MetricReport};
pub use packets::{make_eval_packets, EvalPacket};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index per input vector.
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub seed: u64,
    pub iterations: usize,
    /// Inertia after each Lloyd update; non-increasing.
    pub inertia_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct KMeansOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
    /// Allow K = N. Only meaningful for exact-fit checks.
    pub permit_exact_fit: bool,
}

impl KMeansOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iter: 300,
            tol: 1e-8,
            permit_exact_fit: false,
        }
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

pub(crate) fn check_dims(vectors: &[Vec<f64>]) -> Result<usize> {
    let d = vectors.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::invalid("vectors must be non-empty"));
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: v.len(),
        });
    }
    Ok(d)
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = vectors.iter().map(|v| sq_dist(v, &vectors[chosen[0]])).collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // Every remaining point coincides with a chosen centroid.
            Err(_) => {
                let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
                free[rng.gen_range(0..free.len())]
            }
        };
        chosen.push(next);
        for (i, v) in vectors.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(v, &vectors[next]));
        }
    }
    chosen.into_iter().map(|i| vectors[i].clone()).collect()
}

fn update_centroids(vectors: &[Vec<f64>], assignments: &[usize], k: usize, d: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (v, &c) in vectors.iter().zip(assignments) {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(v) {
            *s += x;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|x| *x /= n as f64);
    }
    sums
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(vectors: &[Vec<f64>], assignments: &mut [usize], centroids: &[Vec<f64>], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &c in assignments.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&n| n == 0) else { return };
        let donor = (0..vectors.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .map(|i| (i, sq_dist(&vectors[i], &centroids[assignments[i]])))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        match donor {
            Some((i, _)) => assignments[i] = empty,
            None => return,
        }
    }
}

fn inertia(vectors: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    vectors
        .iter()
        .zip(assignments)
        .map(|(v, &c)| sq_dist(v, &centroids[c]))
        .sum()
}

/// Lloyd's algorithm from a seeded k-means++ start.
pub fn kmeans(vectors: &[Vec<f64>], opts: &KMeansOptions) -> Result<ClusterModel> {
    let d = check_dims(vectors)?;
    let (n, k) = (vectors.len(), opts.k);
    if k < 2 {
        return Err(Error::invalid("K must be at least 2"));
    }
    if n < k || (n == k && !opts.permit_exact_fit) {
        return Err(Error::invalid(format!("need more points than clusters (N={n}, K={k})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut centroids = plus_plus_init(vectors, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0;
    for _ in 0..opts.max_iter.max(1) {
        iterations += 1;
        for (a, v) in assignments.iter_mut().zip(vectors) {
            *a = nearest(v, &centroids).0;
        }
        repair_empty(vectors, &mut assignments, &centroids, k);
        let updated = update_centroids(vectors, &assignments, k, d);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| dist(a, b))
            .fold(0.0, f64::max);
        centroids = updated;
        let current = inertia(vectors, &assignments, &centroids);
        if let Some(&prev) = trace.last() {
            assert!(
                current <= prev + 1e-9 * prev.max(1.0),
                "inertia increased from {prev} to {current}"
            );
        }
        trace.push(current);
        if shift < opts.tol {
            break;
        }
    }
    Ok(ClusterModel {
        k,
        centroids,
        assignments,
        inertia: *trace.last().unwrap_or(&0.0),
        seed: opts.seed,
        iterations,
        inertia_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = Vec::new();
        let mut truth = Vec::new();
        for (label, center) in [(0usize, 0.0), (1, 10.0)] {
            for _ in 0..20 {
                v.push(vec![center + rng.gen_range(-0.1..0.1), center + rng.gen_range(-0.1..0.1)]);
                truth.push(label);
            }
        }
        (v, truth)
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let (v, truth) = blobs(3);
        let m = kmeans(&v, &KMeansOptions::new(2, 7)).unwrap();
        let mut agree = 0;
        for (a, t) in m.assignments.iter().zip(&truth) {
            if *a == m.assignments[0] && *t == truth[0] || *a != m.assignments[0] && *t != truth[0] {
                agree += 1;
            }
        }
        assert_eq!(agree, truth.len());
    }

    #[test]
    fn exact_fit_has_zero_inertia() {
        let v: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64]).collect();
        assert!(kmeans(&v, &KMeansOptions::new(5, 1)).is_err());
        let mut o = KMeansOptions::new(5, 1);
        o.permit_exact_fit = true;
        let m = kmeans(&v, &o).unwrap();
        assert_eq!(m.inertia, 0.0);
        let mut seen = m.assignments.clone();
        seen.sort();
        assert_eq!(seen, [0, 1, 2, 3, 4]);
    }

    #[test]
    fn deterministic_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| rng.gen::<f64>()).collect()).collect();
        let a = kmeans(&v, &KMeansOptions::new(6, 5)).unwrap();
        let b = kmeans(&v, &KMeansOptions::new(6, 5)).unwrap();
        assert_eq!(a, b);
        assert!(a.inertia_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        for c in 0..6 {
            assert!(!a.members(c).is_empty());
        }
        let direct = inertia(&v, &a.assignments, &a.centroids);
        assert!((direct - a.inertia).abs() < 1e-12);
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let mut v = vec![vec![0.0, 0.0]; 8];
        v.push(vec![1.0, 1.0]);
        let m = kmeans(&v, &KMeansOptions::new(3, 2)).unwrap();
        for c in 0..3 {
            assert!(!m.members(c).is_empty());
        }
    }

    #[test]
    fn rejects_too_few_points() {
        let v = vec![vec![0.0], vec![1.0]];
        assert!(kmeans(&v, &KMeansOptions::new(3, 0)).is_err());
        assert!(kmeans(&v, &KMeansOptions::new(1, 0)).is_err());
    }

    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn model_invariants(
            points in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 2), 6..30),
            k in 2usize..5,
            seed in any::<u64>(),
        ) {
            let Ok(m) = kmeans(&points, &KMeansOptions::new(k, seed)) else { return Ok(()) };
            prop_assert_eq!(m.assignments.len(), points.len());
            for c in 0..k {
                prop_assert!(!m.members(c).is_empty());
            }
            let inertia: f64 = points.iter().zip(&m.assignments).map(|(p, &c)| sq_dist(p, &m.centroids[c])).sum();
            prop_assert!((inertia - m.inertia).abs() <= 1e-9 * inertia.max(1.0));
            for w in m.inertia_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
            prop_assert_eq!(&m, &kmeans(&points, &KMeansOptions::new(k, seed)).unwrap());
        }
    }
}
