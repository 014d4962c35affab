mod common;

use common::oracles;
use infdecomp_core::cluster::*;
use infdecomp_core::Error;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn six_points() -> (Vec<Vec<f64>>, Vec<usize>) {
    (
        vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![5.0, 5.0],
            vec![6.0, 5.0],
            vec![5.0, 7.0],
        ],
        vec![0, 0, 0, 1, 1, 1],
    )
}

#[test]
fn six_point_fixture_matches_definitions() {
    let (p, l) = six_points();
    assert!((silhouette(&p, &l).unwrap() - oracles::silhouette(&p, &l)).abs() < 1e-12);
    assert!(oracles::close(calinski_harabasz(&p, &l).unwrap(), oracles::calinski_harabasz(&p, &l), 1e-12));
    assert!((davies_bouldin(&p, &l).unwrap() - oracles::davies_bouldin(&p, &l)).abs() < 1e-12);
    // Centroids (1/3, 2/3) and (16/3, 17/3), grand mean (17/6, 19/6):
    // B = 6 * 12.5 = 75, W = 2 * 30/9, CH = 75 / (W / 4) = 45.
    assert!((calinski_harabasz(&p, &l).unwrap() - 45.0).abs() < 1e-9);
}

#[test]
fn metrics_match_oracles_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let (p, l) = oracles::random_clustering(&mut rng);
        let s = silhouette(&p, &l).unwrap();
        assert!((s - oracles::silhouette(&p, &l)).abs() < 1e-12);
        let ch = calinski_harabasz(&p, &l).unwrap();
        assert!(oracles::close(ch, oracles::calinski_harabasz(&p, &l), 1e-12));
        let db = davies_bouldin(&p, &l).unwrap();
        assert!(oracles::close(db, oracles::davies_bouldin(&p, &l), 1e-12));
    }
}

fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    m.qr().q()
}

#[test]
fn invariant_to_rotation_and_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let (p, l) = oracles::random_clustering(&mut rng);
        let dim = p[0].len();
        let q = random_rotation(dim, &mut rng);
        let rotated: Vec<Vec<f64>> = p
            .iter()
            .map(|v| (&q * nalgebra::DVector::from_column_slice(v)).iter().copied().collect())
            .collect();
        let mut perm: Vec<usize> = (0..3).collect();
        perm.shuffle(&mut rng);
        let relabeled: Vec<usize> = l.iter().map(|&c| perm[c] + 10).collect();
        let a = evaluate(&p, &l).unwrap();
        for (v, lab) in [(&rotated, &l), (&p, &relabeled)] {
            let b = evaluate(v, lab).unwrap();
            assert!((a.silhouette - b.silhouette).abs() < 1e-8);
            assert!(oracles::close(a.calinski_harabasz, b.calinski_harabasz, 1e-8));
            assert!((a.davies_bouldin - b.davies_bouldin).abs() < 1e-8);
        }
    }
}

fn blobs(rng: &mut ChaCha8Rng, per: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut p = Vec::new();
    let mut l = Vec::new();
    for (c, center) in [(0.0, 0.0), (10.0, 10.0)].iter().enumerate() {
        for _ in 0..per {
            p.push(vec![center.0 + rng.gen_range(-0.1..0.1), center.1 + rng.gen_range(-0.1..0.1)]);
            l.push(c);
        }
    }
    (p, l)
}

#[test]
fn blob_assignments_are_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (p, truth) = blobs(&mut rng, 20);
    let m = kmeans(&p, &KMeansOptions::new(2, 3)).unwrap();
    for i in 0..p.len() {
        for j in 0..p.len() {
            assert_eq!(truth[i] == truth[j], m.assignments[i] == m.assignments[j]);
        }
    }
}

#[test]
fn truth_beats_random_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (p, truth) = blobs(&mut rng, 15);
    let random: Vec<usize> = (0..p.len()).map(|i| (i * 7 + rng.gen_range(0..2)) % 2).collect();
    let good = evaluate(&p, &truth).unwrap();
    let bad = evaluate(&p, &random).unwrap();
    assert!(good.silhouette >= bad.silhouette);
    assert!(good.davies_bouldin <= bad.davies_bouldin);
    assert!(good.calinski_harabasz > bad.calinski_harabasz);
}

#[test]
fn random_labels_on_one_blob_score_low_ch() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let one: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
    let ch_random = calinski_harabasz(&one, &labels).unwrap();
    let (p, truth) = blobs(&mut rng, 20);
    assert!(ch_random < calinski_harabasz(&p, &truth).unwrap());
    assert!(ch_random < 10.0);
}

#[test]
fn zero_within_dispersion_is_degenerate() {
    let p = vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0]];
    let l = vec![0, 0, 1, 1];
    assert!(matches!(calinski_harabasz(&p, &l), Err(Error::DegenerateClustering(_))));
    assert_eq!(silhouette(&p, &l).unwrap(), 1.0);
    assert_eq!(davies_bouldin(&p, &l).unwrap(), 0.0);
}
