//! Definitional brute-force versions of the evaluation metrics, written
//! independently of the library code.
#![allow(dead_code)]

use rand::Rng;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// 1-based rank, ties share the mean of the positions they span.
fn rank_by_counting(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let below = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(pred: &[f64], gold: &[f64]) -> f64 {
    pearson(&rank_by_counting(pred), &rank_by_counting(gold))
}

/// Items ordered by descending score, ties by input position.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> f64 {
    let n = scores.len();
    let before = |j: usize, i: usize| scores[j] > scores[i] || (scores[j] == scores[i] && j < i);
    let mut total = 0.0;
    let mut positives = 0;
    for i in 0..n {
        if !labels[i] {
            continue;
        }
        positives += 1;
        let ahead: Vec<usize> = (0..n).filter(|&j| before(j, i)).collect();
        let rank = ahead.len() + 1;
        let hits = ahead.iter().filter(|&&j| labels[j]).count() + 1;
        total += hits as f64 / rank as f64;
    }
    total / positives as f64
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn labels_present(labels: &[usize]) -> Vec<usize> {
    let mut l = labels.to_vec();
    l.sort();
    l.dedup();
    l
}

fn centroid(points: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<f64> {
    let members: Vec<&Vec<f64>> = points.iter().zip(labels).filter(|(_, l)| **l == k).map(|(p, _)| p).collect();
    (0..points[0].len())
        .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
        .collect()
}

pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let ks = labels_present(labels);
    let mut s = Vec::new();
    for i in 0..points.len() {
        let own: Vec<f64> = (0..points.len())
            .filter(|&j| j != i && labels[j] == labels[i])
            .map(|j| dist(&points[i], &points[j]))
            .collect();
        if own.is_empty() {
            s.push(0.0);
            continue;
        }
        let a = mean(&own);
        let b = ks
            .iter()
            .filter(|&&k| k != labels[i])
            .map(|&k| {
                let d: Vec<f64> = (0..points.len())
                    .filter(|&j| labels[j] == k)
                    .map(|j| dist(&points[i], &points[j]))
                    .collect();
                mean(&d)
            })
            .fold(f64::INFINITY, f64::min);
        s.push(if a.max(b) == 0.0 { 0.0 } else { (b - a) / a.max(b) });
    }
    mean(&s)
}

pub fn calinski_harabasz(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let ks = labels_present(labels);
    let n = points.len() as f64;
    let k = ks.len() as f64;
    let all = centroid(points, &vec![0; points.len()], 0);
    let mut between = 0.0;
    let mut within = 0.0;
    for &c in &ks {
        let ck = centroid(points, labels, c);
        let nk = labels.iter().filter(|l| **l == c).count() as f64;
        between += nk * dist(&ck, &all).powi(2);
        for (p, l) in points.iter().zip(labels) {
            if *l == c {
                within += dist(p, &ck).powi(2);
            }
        }
    }
    (between / (k - 1.0)) / (within / (n - k))
}

pub fn davies_bouldin(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let ks = labels_present(labels);
    let cents: Vec<Vec<f64>> = ks.iter().map(|&c| centroid(points, labels, c)).collect();
    let scatter: Vec<f64> = ks
        .iter()
        .zip(&cents)
        .map(|(&c, ck)| {
            let d: Vec<f64> = points.iter().zip(labels).filter(|(_, l)| **l == c).map(|(p, _)| dist(p, ck)).collect();
            mean(&d)
        })
        .collect();
    let worst: Vec<f64> = (0..ks.len())
        .map(|i| {
            (0..ks.len())
                .filter(|&j| j != i)
                .map(|j| (scatter[i] + scatter[j]) / dist(&cents[i], &cents[j]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    mean(&worst)
}

/// Random labelled point set: 3..=8 points, 2 or 3 non-empty clusters, at
/// least one cluster with two members.
pub fn random_clustering(rng: &mut impl Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
    loop {
        let n = rng.gen_range(3..=8);
        let k = rng.gen_range(2..=3.min(n - 1));
        let dim = rng.gen_range(1..=4);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        if labels_present(&labels).len() != k {
            continue;
        }
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        return (points, labels);
    }
}

/// Random scores with deliberate ties (values on a coarse grid).
pub fn random_scores(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0..5) as f64 * 0.25).collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
