//! Reference implementations and generators shared by the integration tests.

#![allow(dead_code)]

use metro_ads::mining::{Clustering, Label, Metric};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const NOISE: i64 = -1;

/// Brute-force DBSCAN: full pairwise neighbourhoods, transitive closure of
/// the core graph, border points assigned to the component of their first
/// core neighbour in lexicographic point order. Component ids follow the same
/// order. Returns one label per point, `NOISE` for noise.
pub fn oracle_dbscan(points: &[Vec<f64>], metric: Metric, eps: f64, min_pts: usize) -> Vec<i64> {
    let n = points.len();
    let dist = |a: &[f64], b: &[f64]| match metric {
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        Metric::CircularMinutes => {
            let d = (a[0] - b[0]).abs();
            d.min(1440.0 - d)
        }
    };
    let adj: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| dist(&points[i], &points[j]) <= eps).collect())
        .collect();
    let core: Vec<bool> = adj
        .iter()
        .map(|row| row.iter().filter(|&&b| b).count() >= min_pts)
        .collect();

    // Reachability closure over core points (Warshall on bitsets).
    let words = n.div_ceil(64);
    let mut reach: Vec<Vec<u64>> = vec![vec![0; words]; n];
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && adj[i][j] {
                reach[i][j / 64] |= 1 << (j % 64);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k / 64] >> (k % 64) & 1 == 1 {
                let row_k = reach[k].clone();
                for (w, r) in reach[i].iter_mut().zip(&row_k) {
                    *w |= r;
                }
            }
        }
    }
    let connected = |i: usize, j: usize| reach[i][j / 64] >> (j % 64) & 1 == 1;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        for (x, y) in points[a].iter().zip(&points[b]) {
            match x.partial_cmp(y).expect("finite") {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        a.cmp(&b)
    });

    let mut label = vec![NOISE; n];
    let mut next = 0;
    for &i in &order {
        if core[i] && label[i] == NOISE {
            for (j, l) in label.iter_mut().enumerate() {
                if connected(i, j) {
                    *l = next;
                }
            }
            next += 1;
        }
    }
    for i in 0..n {
        if !core[i] {
            if let Some(&j) = order.iter().find(|&&j| core[j] && adj[i][j]) {
                label[i] = label[j];
            }
        }
    }
    label
}

pub fn labels(c: &Clustering) -> Vec<i64> {
    c.labels
        .iter()
        .map(|l| match l {
            Label::Noise => NOISE,
            Label::Cluster(id) => id.0 as i64,
        })
        .collect()
}

/// Canonical form of a labelling: each label replaced by the index of the
/// first point carrying it, so equal partitions compare equal.
pub fn partition(labels: &[i64]) -> Vec<i64> {
    let mut first = std::collections::HashMap::new();
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if l == NOISE {
                NOISE
            } else {
                *first.entry(l).or_insert(i as i64)
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub points: Vec<Vec<f64>>,
    pub metric: Metric,
    pub eps: f64,
    pub min_pts: usize,
}

/// Random clustering instance with up to `max_n` points. Coordinates are
/// drawn either on an integer grid (duplicates and exact-eps distances) or
/// continuously around a few centres.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize) -> Instance {
    let n = rng.gen_range(0..=max_n);
    let circular = rng.gen_bool(0.4);
    let grid = rng.gen_bool(0.5);
    let (metric, dim) = if circular {
        (Metric::CircularMinutes, 1)
    } else {
        (Metric::Euclidean, rng.gen_range(1..=4))
    };
    let span = if circular { 1440.0 } else { rng.gen_range(5.0..100.0) };
    let centres: Vec<Vec<f64>> = (0..rng.gen_range(1..=5))
        .map(|_| (0..dim).map(|_| rng.gen_range(0.0..span)).collect())
        .collect();
    let spread = span * rng.gen_range(0.01..0.1);
    let points = (0..n)
        .map(|_| {
            let c = &centres[rng.gen_range(0..centres.len())];
            (0..dim)
                .map(|d| {
                    let x = if rng.gen_bool(0.15) {
                        rng.gen_range(0.0..span)
                    } else {
                        c[d] + rng.gen_range(-spread..=spread)
                    };
                    let x = if grid { x.round() + 0.0 } else { x };
                    if circular {
                        x.rem_euclid(1440.0) % 1440.0
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect();
    let eps = if grid {
        rng.gen_range(1..=(spread as u32).max(2) * 2) as f64
    } else {
        spread * rng.gen_range(0.2..2.0)
    };
    Instance {
        points,
        metric,
        eps,
        min_pts: rng.gen_range(1..=8),
    }
}
