//! The six leader-selection algorithms.
//!
//! Every selector returns a sorted [`LeaderSet`] of exactly `k` agents. Ties
//! (degree, distance, eigenvalue) go to the lowest agent id, or to the
//! lexicographically smallest subset when whole subsets compete.

pub mod combination;
pub mod kmeans;

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ground, AgentId, LaplacianMatrix, LeaderSet, WeightedGraph};
use crate::rng::rng_from_seed;
use crate::spectral::{convergence_rate, SymmetricMatrix};

pub use combination::{binomial, unrank_combination, CombinationIndexer};
pub use kmeans::{kmeans_cluster, ClusterAssignment, KMeansConfig};

/// Default number of sampled subsets for huge random selection.
pub const DEFAULT_HUGE_RANDOM_SAMPLES: usize = 10_000;

/// Two eigenvalues closer than this (relative to `max(1, |x|)`) count as tied.
pub const RATE_TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[serde(rename = "greedy")]
    GreedyKLeader,
    Random,
    MaxDegree,
    AverageDegree,
    #[serde(rename = "kmeans")]
    KMeans,
    HugeRandom,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::GreedyKLeader,
        Algorithm::Random,
        Algorithm::MaxDegree,
        Algorithm::AverageDegree,
        Algorithm::KMeans,
        Algorithm::HugeRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::GreedyKLeader => "greedy",
            Algorithm::Random => "random",
            Algorithm::MaxDegree => "max-degree",
            Algorithm::AverageDegree => "average-degree",
            Algorithm::KMeans => "kmeans",
            Algorithm::HugeRandom => "huge-random",
        }
    }

    /// Stable numeric id used to derive per-algorithm random streams.
    pub fn id(self) -> u64 {
        self as u64
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Algorithm::Random | Algorithm::KMeans | Algorithm::HugeRandom)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            Error::param(format!(
                "unknown algorithm '{s}'; valid names: {}",
                Algorithm::ALL.iter().map(|a| a.name()).join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionParams {
    pub seed: u64,
    pub huge_random_samples: usize,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            seed: 0,
            huge_random_samples: DEFAULT_HUGE_RANDOM_SAMPLES,
        }
    }
}

pub fn select(algorithm: Algorithm, g: &WeightedGraph, k: usize, params: &SelectionParams) -> Result<LeaderSet> {
    match algorithm {
        Algorithm::GreedyKLeader => select_greedy_k_leader(g, k),
        Algorithm::Random => select_random(g.n(), k, params.seed),
        Algorithm::MaxDegree => select_max_degree(g, k),
        Algorithm::AverageDegree => select_average_degree(g, k),
        Algorithm::KMeans => select_kmeans(g, k, params.seed),
        Algorithm::HugeRandom => select_huge_random(g, k, params.huge_random_samples, params.seed),
    }
}

/// One selector run together with the rate its leaders achieve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub algorithm: Algorithm,
    pub leaders: LeaderSet,
    /// lambda_min of the grounded Laplacian; `None` when every agent leads.
    pub rate: Option<f64>,
}

impl SelectionRecord {
    pub fn evaluate(algorithm: Algorithm, g: &WeightedGraph, leaders: LeaderSet) -> Result<Self> {
        let rate = if leaders.len() < g.n() {
            Some(convergence_rate(&ground(&g.laplacian(), &leaders)?)?)
        } else {
            None
        };
        Ok(SelectionRecord {
            algorithm,
            leaders,
            rate,
        })
    }

    pub fn run(algorithm: Algorithm, g: &WeightedGraph, k: usize, params: &SelectionParams) -> Result<Self> {
        let leaders = select(algorithm, g, k, params)?;
        SelectionRecord::evaluate(algorithm, g, leaders)
    }

    pub const CSV_HEADER: &'static str = "algorithm,k,leaders,lambda_min";

    /// `algorithm,k,leaders,lambda_min` with `;`-joined leaders.
    pub fn to_csv_row(&self) -> String {
        let rate = self.rate.map(|r| format!("{r:?}")).unwrap_or_default();
        format!(
            "{},{},{},{}",
            self.algorithm,
            self.leaders.len(),
            self.leaders.joined(),
            rate
        )
    }
}

fn check_k(k: usize, n: usize, strict: bool) -> Result<()> {
    let upper_ok = if strict { k < n } else { k <= n };
    if k == 0 || !upper_ok {
        let bound = if strict {
            format!("[1, {})", n)
        } else {
            format!("[1, {}]", n)
        };
        return Err(Error::param(format!("leader count {k} must lie in {bound}")));
    }
    Ok(())
}

pub(crate) fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= RATE_TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

pub(crate) fn beats(candidate: f64, best: f64) -> bool {
    candidate > best && !ties(candidate, best)
}

/// lambda_min of L restricted to the complement of sorted `leaders`.
fn grounded_rate(l: &DMatrix<f64>, leaders: &[usize]) -> f64 {
    let n = l.nrows();
    let mut followers = Vec::with_capacity(n - leaders.len());
    let mut next = leaders.iter().peekable();
    for i in 0..n {
        if next.peek() == Some(&&i) {
            next.next();
        } else {
            followers.push(i);
        }
    }
    let lff = l.select_rows(&followers).select_columns(&followers);
    lff.symmetric_eigenvalues().min()
}

/// Adds, k times, the candidate whose inclusion maximizes lambda_min.
pub fn select_greedy_k_leader(g: &WeightedGraph, k: usize) -> Result<LeaderSet> {
    let n = g.n();
    check_k(k, n, true)?;
    let l = g.laplacian().into_matrix();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for _ in 0..k {
        let candidates: Vec<usize> = (0..n).filter(|c| !chosen.contains(c)).collect();
        let rates: Vec<f64> = candidates
            .par_iter()
            .map(|&c| {
                let mut trial = chosen.clone();
                trial.push(c);
                trial.sort_unstable();
                grounded_rate(&l, &trial)
            })
            .collect();
        let mut best = 0;
        for i in 1..candidates.len() {
            if beats(rates[i], rates[best]) {
                best = i;
            }
        }
        chosen.push(candidates[best]);
    }
    LeaderSet::new(chosen, n)
}

/// Uniform k-subset by a partial Fisher-Yates shuffle of `0..n`.
pub fn select_random(n: usize, k: usize, seed: u64) -> Result<LeaderSet> {
    check_k(k, n, false)?;
    let mut rng = rng_from_seed(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    LeaderSet::new(pool, n)
}

fn take_ranked(mut order: Vec<(f64, usize)>, k: usize, n: usize) -> Result<LeaderSet> {
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    LeaderSet::new(order.into_iter().take(k).map(|(_, i)| i), n)
}

pub fn select_max_degree(g: &WeightedGraph, k: usize) -> Result<LeaderSet> {
    check_k(k, g.n(), false)?;
    let order = (0..g.n()).map(|i| (-g.weighted_indegree(AgentId(i)), i)).collect();
    take_ranked(order, k, g.n())
}

/// The k agents whose weighted indegree is closest to the mean indegree.
pub fn select_average_degree(g: &WeightedGraph, k: usize) -> Result<LeaderSet> {
    let n = g.n();
    check_k(k, n, false)?;
    let degrees = g.weighted_degrees();
    let mean = degrees.iter().sum::<f64>() / n as f64;
    let order = degrees.iter().enumerate().map(|(i, d)| ((d - mean).abs(), i)).collect();
    take_ranked(order, k, n)
}

/// Clusters agent positions, then walks clusters in id order taking the
/// agent nearest each center that is not already a leader.
pub fn select_kmeans(g: &WeightedGraph, k: usize, seed: u64) -> Result<LeaderSet> {
    let n = g.n();
    check_k(k, n, false)?;
    let clusters = kmeans_cluster(g.coords(), k, seed)?;
    let mut taken = vec![false; n];
    let mut leaders = Vec::with_capacity(k);
    for center in &clusters.centers {
        let pick = (0..n)
            .filter(|&i| !taken[i])
            .min_by(|&a, &b| {
                let da = g.coords()[a].distance_sq(center);
                let db = g.coords()[b].distance_sq(center);
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("k <= n leaves an untaken agent");
        taken[pick] = true;
        leaders.push(pick);
    }
    LeaderSet::new(leaders, n)
}

/// Best of `samples` uniformly drawn k-subsets, or of all subsets when
/// C(n, k) <= samples.
pub fn select_huge_random(g: &WeightedGraph, k: usize, samples: usize, seed: u64) -> Result<LeaderSet> {
    let n = g.n();
    check_k(k, n, true)?;
    let indexer = CombinationIndexer::new(n, k)?;
    let total = indexer.total();
    let subsets: Vec<Vec<usize>> = if total <= samples as u128 {
        (0..n).combinations(k).collect()
    } else {
        let mut rng = rng_from_seed(seed);
        (0..samples)
            .map(|_| indexer.unrank(rng.random_range(1..=total)))
            .collect::<Result<_>>()?
    };
    let l = g.laplacian().into_matrix();
    let rates: Vec<f64> = subsets.par_iter().map(|s| grounded_rate(&l, s)).collect();

    let mut best = 0;
    for i in 1..subsets.len() {
        if beats(rates[i], rates[best]) || (ties(rates[i], rates[best]) && subsets[i] < subsets[best]) {
            best = i;
        }
    }
    LeaderSet::new(subsets[best].iter().copied(), n)
}

/// Exhaustive optimum over every k-subset; exponential, for small graphs.
pub fn brute_force_optimum(g: &WeightedGraph, k: usize) -> Result<(LeaderSet, f64)> {
    let n = g.n();
    check_k(k, n, true)?;
    let l = g.laplacian();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for subset in (0..n).combinations(k) {
        let rate = rate_of(&l, &subset)?;
        if best.as_ref().is_none_or(|(_, r)| beats(rate, *r)) {
            best = Some((subset, rate));
        }
    }
    let (subset, rate) = best.expect("at least one subset");
    Ok((LeaderSet::new(subset, n)?, rate))
}

fn rate_of(l: &LaplacianMatrix, leaders: &[usize]) -> Result<f64> {
    let set = LeaderSet::new(leaders.iter().copied(), l.order())?;
    let sys = ground(l, &set)?;
    Ok(SymmetricMatrix::new(sys.lff)?.smallest_eigenvalue())
}
