//! Density-based clustering with a deterministic border-point rule.
//!
//! Points are first put in a canonical order (lexicographic by coordinate,
//! then by input index). Cluster ids are handed out in that order, and a
//! border point reachable from several clusters joins the cluster of its
//! first core neighbour in that order. The output therefore depends only on
//! the multiset of points, never on the order they were supplied in.
//!
//! Identical points are collapsed into one weighted point before the
//! neighbourhood pass, which keeps trip data (many riders on the same OD pair
//! or minute) cheap to cluster.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::MINUTES_PER_DAY;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// 1-D minute of day with wraparound at midnight.
    CircularMinutes,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::CircularMinutes => circular_minutes(a[0], b[0]),
        }
    }
}

pub fn circular_minutes(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(MINUTES_PER_DAY as f64 - d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Vec<f64>>,
    metric: Metric,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>, metric: Metric) -> Result<Self> {
        if let Some(first) = points.first() {
            let dim = first.len();
            if dim == 0 {
                return Err(Error::Input("points must have at least one coordinate".into()));
            }
            for (i, p) in points.iter().enumerate() {
                if p.len() != dim {
                    return Err(Error::Input(format!(
                        "point {i} has dimension {}, expected {dim}",
                        p.len()
                    )));
                }
                if p.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Input(format!("point {i} has a non-finite coordinate")));
                }
            }
            if metric == Metric::CircularMinutes {
                if dim != 1 {
                    return Err(Error::Input("circular_minutes needs 1-D points".into()));
                }
                if let Some(i) = points
                    .iter()
                    .position(|p| !(0.0..MINUTES_PER_DAY as f64).contains(&p[0]))
                {
                    return Err(Error::Input(format!("point {i} is outside [0, 1440)")));
                }
            }
        }
        Ok(PointSet { points, metric })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u32);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Noise,
    Cluster(ClusterId),
}

impl Label {
    pub fn cluster(self) -> Option<ClusterId> {
        match self {
            Label::Cluster(id) => Some(id),
            Label::Noise => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub labels: Vec<Label>,
    pub core: Vec<bool>,
    pub eps: f64,
    pub min_pts: usize,
}

impl Clustering {
    pub fn cluster_count(&self) -> usize {
        self.labels
            .iter()
            .filter_map(|l| l.cluster())
            .map(|c| c.0 as usize + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == Label::Noise).count()
    }

    /// Point indices per cluster, indexed by cluster id.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count()];
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(c) = l.cluster() {
                out[c.0 as usize].push(i);
            }
        }
        out
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Input indices in canonical order.
pub fn canonical_order(points: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lexicographic(&points[a], &points[b]).then(a.cmp(&b)));
    order
}

struct Distinct<'a> {
    coords: Vec<&'a [f64]>,
    weight: Vec<usize>,
    /// Distinct-point slot of every input point.
    slot: Vec<usize>,
}

fn collapse(points: &[Vec<f64>]) -> Distinct<'_> {
    let order = canonical_order(points);
    let mut d = Distinct {
        coords: Vec::new(),
        weight: Vec::new(),
        slot: vec![0; points.len()],
    };
    for i in order {
        let p = points[i].as_slice();
        if d.coords.last().is_some_and(|q| *q == p) {
            *d.weight.last_mut().expect("non-empty") += 1;
        } else {
            d.coords.push(p);
            d.weight.push(1);
        }
        d.slot[i] = d.coords.len() - 1;
    }
    d
}

/// Ascending neighbour lists (self included) of the distinct points.
fn neighbourhoods(d: &Distinct<'_>, metric: Metric, eps: f64) -> Vec<Vec<usize>> {
    let m = d.coords.len();
    match metric {
        // Canonical order sorts on the first coordinate, so only a window
        // around each point can be within eps.
        Metric::Euclidean => (0..m)
            .map(|i| {
                let x0 = d.coords[i][0];
                // Widened so rounding never prunes a true neighbour.
                let reach = eps + 1e-9 * (eps + x0.abs());
                let lo = d.coords[..i].partition_point(|p| p[0] < x0 - reach);
                let hi = i + d.coords[i..].partition_point(|p| p[0] <= x0 + reach);
                (lo..hi)
                    .filter(|&j| metric.distance(d.coords[i], d.coords[j]) <= eps)
                    .collect()
            })
            .collect(),
        Metric::CircularMinutes => (0..m)
            .map(|i| {
                (0..m)
                    .filter(|&j| metric.distance(d.coords[i], d.coords[j]) <= eps)
                    .collect()
            })
            .collect(),
    }
}

/// Clusters `points`. `min_pts` counts the point itself.
pub fn dbscan(points: &PointSet, eps: f64, min_pts: usize) -> Result<Clustering> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Input(format!("eps must be positive, got {eps}")));
    }
    if min_pts == 0 {
        return Err(Error::Input("min_pts must be at least 1".into()));
    }
    let distinct = collapse(&points.points);
    let neighbours = neighbourhoods(&distinct, points.metric, eps);
    let is_core: Vec<bool> = neighbours
        .iter()
        .map(|ns| ns.iter().map(|&j| distinct.weight[j]).sum::<usize>() >= min_pts)
        .collect();

    let m = distinct.coords.len();
    let mut label: Vec<Option<ClusterId>> = vec![None; m];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for seed in 0..m {
        if !is_core[seed] || label[seed].is_some() {
            continue;
        }
        let id = ClusterId(next);
        next += 1;
        label[seed] = Some(id);
        stack.push(seed);
        while let Some(p) = stack.pop() {
            for &q in &neighbours[p] {
                if is_core[q] && label[q].is_none() {
                    label[q] = Some(id);
                    stack.push(q);
                }
            }
        }
    }
    for i in 0..m {
        if !is_core[i] {
            label[i] = neighbours[i].iter().find(|&&j| is_core[j]).and_then(|&j| label[j]);
        }
    }

    Ok(Clustering {
        labels: distinct
            .slot
            .iter()
            .map(|&s| label[s].map_or(Label::Noise, Label::Cluster))
            .collect(),
        core: distinct.slot.iter().map(|&s| is_core[s]).collect(),
        eps,
        min_pts,
    })
}
