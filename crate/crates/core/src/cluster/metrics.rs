use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_dims, dist, sq_dist};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub silhouette: f64,
    pub calinski_harabasz: f64,
    pub davies_bouldin: f64,
}

/// Member indices per distinct label, in label order.
fn groups(n: usize, assignments: &[usize]) -> Result<Vec<Vec<usize>>> {
    if assignments.len() != n {
        return Err(Error::invalid("one assignment per vector required"));
    }
    let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in assignments.iter().enumerate() {
        map.entry(c).or_default().push(i);
    }
    Ok(map.into_values().collect())
}

fn centroid(vectors: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let d = vectors[members[0]].len();
    let mut c = vec![0.0; d];
    for &i in members {
        for (s, x) in c.iter_mut().zip(&vectors[i]) {
            *s += x;
        }
    }
    c.iter_mut().for_each(|s| *s /= members.len() as f64);
    c
}

/// Mean silhouette over all points. Points in singleton clusters, and points
/// with a = b = 0, score 0.
pub fn silhouette(vectors: &[Vec<f64>], assignments: &[usize]) -> Result<f64> {
    check_dims(vectors)?;
    let groups = groups(vectors.len(), assignments)?;
    if groups.len() < 2 {
        return Err(Error::DegenerateClustering("silhouette needs at least two clusters".into()));
    }
    let mut label_of = vec![0usize; vectors.len()];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            label_of[i] = g;
        }
    }
    let mut total = 0.0;
    for i in 0..vectors.len() {
        let own = label_of[i];
        if groups[own].len() == 1 {
            continue;
        }
        let mut sums = vec![0.0; groups.len()];
        for (j, v) in vectors.iter().enumerate() {
            if j != i {
                sums[label_of[j]] += dist(&vectors[i], v);
            }
        }
        let a = sums[own] / (groups[own].len() - 1) as f64;
        let b = (0..groups.len())
            .filter(|&g| g != own)
            .map(|g| sums[g] / groups[g].len() as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / vectors.len() as f64)
}

/// Between- over within-cluster dispersion, each divided by its degrees of freedom.
pub fn calinski_harabasz(vectors: &[Vec<f64>], assignments: &[usize]) -> Result<f64> {
    check_dims(vectors)?;
    let groups = groups(vectors.len(), assignments)?;
    let (n, k) = (vectors.len(), groups.len());
    if k < 2 || k >= n {
        return Err(Error::DegenerateClustering(format!(
            "Calinski-Harabasz needs 2 <= K < N (K={k}, N={n})"
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let global = centroid(vectors, &all);
    let (mut between, mut within) = (0.0, 0.0);
    for members in &groups {
        let c = centroid(vectors, members);
        between += members.len() as f64 * sq_dist(&c, &global);
        within += members.iter().map(|&i| sq_dist(&vectors[i], &c)).sum::<f64>();
    }
    if within == 0.0 {
        return Err(Error::DegenerateClustering("degenerate separation: zero within-cluster dispersion".into()));
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}

/// Mean over clusters of the worst (σ_i + σ_j) / d(c_i, c_j) ratio, with σ the
/// mean member distance to the centroid.
pub fn davies_bouldin(vectors: &[Vec<f64>], assignments: &[usize]) -> Result<f64> {
    check_dims(vectors)?;
    let groups = groups(vectors.len(), assignments)?;
    let k = groups.len();
    if k < 2 {
        return Err(Error::DegenerateClustering("Davies-Bouldin needs at least two clusters".into()));
    }
    let centroids: Vec<Vec<f64>> = groups.iter().map(|m| centroid(vectors, m)).collect();
    let spread: Vec<f64> = groups
        .iter()
        .zip(&centroids)
        .map(|(m, c)| m.iter().map(|&i| dist(&vectors[i], c)).sum::<f64>() / m.len() as f64)
        .collect();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in (0..k).filter(|&j| j != i) {
            let d = dist(&centroids[i], &centroids[j]);
            if d == 0.0 {
                return Err(Error::DegenerateClustering("coincident centroids".into()));
            }
            worst = worst.max((spread[i] + spread[j]) / d);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

pub fn evaluate(vectors: &[Vec<f64>], assignments: &[usize]) -> Result<MetricReport> {
    Ok(MetricReport {
        silhouette: silhouette(vectors, assignments)?,
        calinski_harabasz: calinski_harabasz(vectors, assignments)?,
        davies_bouldin: davies_bouldin(vectors, assignments)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separated() -> (Vec<Vec<f64>>, Vec<usize>) {
        (
            vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0], vec![5.0, 5.0], vec![5.0, 5.0]],
            vec![0, 0, 0, 1, 1],
        )
    }

    #[test]
    fn identical_point_clusters() {
        let (v, a) = separated();
        assert_eq!(silhouette(&v, &a).unwrap(), 1.0);
        assert_eq!(davies_bouldin(&v, &a).unwrap(), 0.0);
        assert!(matches!(calinski_harabasz(&v, &a), Err(Error::DegenerateClustering(_))));
    }

    #[test]
    fn all_points_identical_scores_zero_silhouette() {
        let v = vec![vec![1.0]; 4];
        assert_eq!(silhouette(&v, &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(davies_bouldin(&v, &[0, 0, 1, 1]).is_err());
    }

    #[test]
    fn single_cluster_rejected() {
        let v = vec![vec![1.0], vec![2.0]];
        assert!(silhouette(&v, &[0, 0]).is_err());
        assert!(calinski_harabasz(&v, &[0, 1]).is_err());
    }

    #[test]
    fn label_values_need_not_be_contiguous() {
        let v = vec![vec![0.0], vec![0.5], vec![4.0], vec![4.2]];
        let a = evaluate(&v, &[0, 0, 1, 1]).unwrap();
        let b = evaluate(&v, &[9, 9, 3, 3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tighter_clusters_lower_db() {
        let centers = [[0.0, 0.0], [3.0, 1.0], [-2.0, 4.0]];
        // Offsets sum to zero within a cluster, so centroids stay fixed.
        let offsets = [[0.5, 0.1], [-0.3, 0.4], [-0.2, -0.5]];
        let labels: Vec<usize> = (0..9).map(|i| i / 3).collect();
        let build = |scale: f64| -> Vec<Vec<f64>> {
            (0..9)
                .map(|i| {
                    let c = centers[i / 3];
                    let o = offsets[i % 3];
                    vec![c[0] + scale * o[0], c[1] + scale * o[1]]
                })
                .collect()
        };
        let mut prev = f64::INFINITY;
        for scale in [1.0, 0.75, 0.5, 0.25, 0.1] {
            let db = davies_bouldin(&build(scale), &labels).unwrap();
            assert!(db < prev);
            prev = db;
        }
    }

    use proptest::prelude::*;

    fn labelled() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
        (3usize..12).prop_flat_map(|n| {
            (
                proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2), n),
                proptest::collection::vec(0usize..3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn bounded_and_relabel_invariant((points, labels) in labelled()) {
            let Ok(m) = evaluate(&points, &labels) else { return Ok(()) };
            prop_assert!((-1.0..=1.0).contains(&m.silhouette));
            prop_assert!(m.calinski_harabasz >= 0.0 && m.davies_bouldin >= 0.0);
            let relabelled: Vec<usize> = labels.iter().map(|l| (l + 1) % 3 + 10).collect();
            let r = evaluate(&points, &relabelled).unwrap();
            prop_assert!((m.silhouette - r.silhouette).abs() < 1e-12);
            prop_assert!((m.calinski_harabasz - r.calinski_harabasz).abs() <= 1e-9 * m.calinski_harabasz.max(1.0));
            prop_assert!((m.davies_bouldin - r.davies_bouldin).abs() < 1e-12);
        }
    }
}
