//! Lloyd's k-means on agent coordinates with k-means++ seeding.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Point;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Stop once no center moves farther than this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iter: 300,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub centers: Vec<Point>,
    pub iterations: usize,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub inertia_trace: Vec<f64>,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == cluster)
            .map(|(i, _)| i)
    }

    pub fn inertia(&self, points: &[Point]) -> f64 {
        inertia(points, &self.labels, &self.centers)
    }
}

fn inertia(points: &[Point], labels: &[usize], centers: &[Point]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| p.distance_sq(&centers[l]))
        .sum()
}

fn nearest(p: &Point, centers: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = p.distance_sq(&centers[0]);
    for (c, center) in centers.iter().enumerate().skip(1) {
        let d = p.distance_sq(center);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn seed_centers(points: &[Point], k: usize, rng: &mut impl Rng) -> Vec<Point> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centers = vec![points[first]];
    let mut dist_sq: Vec<f64> = points.iter().map(|p| p.distance_sq(&points[first])).collect();

    while centers.len() < k {
        let total: f64 = dist_sq.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in dist_sq.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`.
            pick.unwrap_or_else(|| dist_sq.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            // Every point coincides with a center: fall back to a uniform unused index.
            let unused: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            unused[rng.random_range(0..unused.len())]
        };
        chosen[pick] = true;
        centers.push(points[pick]);
        for (d, p) in dist_sq.iter_mut().zip(points) {
            *d = d.min(p.distance_sq(&points[pick]));
        }
    }
    centers
}

/// Moves the farthest point of a multi-member cluster into each empty cluster.
fn repair_empty(points: &[Point], labels: &mut [usize], centers: &mut [Point]) {
    let k = centers.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..points.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| {
                let da = points[a].distance_sq(&centers[labels[a]]);
                let db = points[b].distance_sq(&centers[labels[b]]);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("k <= n leaves a cluster with two members");
        labels[donor] = empty;
        centers[empty] = points[donor];
    }
}

fn means(points: &[Point], labels: &[usize], k: usize) -> Vec<Point> {
    let mut sums = vec![(0.0, 0.0, 0usize); k];
    for (p, &l) in points.iter().zip(labels) {
        sums[l].0 += p.x;
        sums[l].1 += p.y;
        sums[l].2 += 1;
    }
    sums.into_iter()
        .map(|(sx, sy, c)| Point::new(sx / c as f64, sy / c as f64))
        .collect()
}

pub fn kmeans_cluster(points: &[Point], k: usize, seed: u64) -> Result<ClusterAssignment> {
    kmeans_cluster_with(points, k, seed, KMeansConfig::default())
}

pub fn kmeans_cluster_with(points: &[Point], k: usize, seed: u64, cfg: KMeansConfig) -> Result<ClusterAssignment> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::param(format!("cluster count {k} must lie in [1, {n}]")));
    }
    let mut rng = rng_from_seed(seed);
    let mut centers = seed_centers(points, k, &mut rng);
    let mut labels = vec![0; n];
    let mut inertia_trace = Vec::new();
    let mut iterations = 0;

    while iterations < cfg.max_iter.max(1) {
        iterations += 1;
        for (label, p) in labels.iter_mut().zip(points) {
            *label = nearest(p, &centers);
        }
        repair_empty(points, &mut labels, &mut centers);
        let updated = means(points, &labels, k);
        let shift = centers
            .iter()
            .zip(&updated)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max);
        centers = updated;
        inertia_trace.push(inertia(points, &labels, &centers));
        if shift < cfg.tol {
            break;
        }
    }

    Ok(ClusterAssignment {
        labels,
        centers,
        iterations,
        inertia_trace,
    })
}
