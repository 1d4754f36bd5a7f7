//! Weighted geometric agent graphs, Laplacians and grounded systems.
//!
//! Agents live in the plane with coordinates in meters. Two agents are
//! connected iff their distance is at most the connection radius, and each
//! edge carries one symmetric weight.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Number of graph draws attempted before giving up on connectivity.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub usize);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Parameters of a random geometric scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricParams {
    pub n: usize,
    /// Side of the square deployment area, meters.
    pub side: f64,
    /// Connection radius, meters.
    pub radius: f64,
    /// Upper bound of the uniform edge-weight interval (0, weight_max].
    pub weight_max: f64,
}

impl GeometricParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("agent count must be at least 1"));
        }
        if !(self.side > 0.0 && self.side.is_finite()) {
            return Err(Error::param(format!("side must be positive, got {}", self.side)));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(Error::param(format!(
                "radius must be non-negative, got {}",
                self.radius
            )));
        }
        if !(self.weight_max > 0.0 && self.weight_max.is_finite()) {
            return Err(Error::param(format!(
                "weight_max must be positive, got {}",
                self.weight_max
            )));
        }
        Ok(())
    }
}

/// Agent positions plus a symmetric weighted adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    coords: Vec<Point>,
    adjacency: DMatrix<f64>,
}

impl WeightedGraph {
    /// Builds a graph from coordinates and a full adjacency matrix.
    ///
    /// The matrix must be square of the right order, exactly symmetric, with
    /// a zero diagonal and non-negative finite weights.
    pub fn new(coords: Vec<Point>, adjacency: DMatrix<f64>) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::param("graph needs at least one agent"));
        }
        if adjacency.nrows() != n || adjacency.ncols() != n {
            return Err(Error::param(format!(
                "adjacency is {}x{}, expected {n}x{n}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::param(format!("self-loop at agent {i}")));
            }
            for j in (i + 1)..n {
                let w = adjacency[(i, j)];
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(Error::param(format!("invalid weight {w} on edge ({i}, {j})")));
                }
                if w != adjacency[(j, i)] {
                    return Err(Error::param(format!("asymmetric weight on edge ({i}, {j})")));
                }
            }
        }
        Ok(WeightedGraph { coords, adjacency })
    }

    /// Builds a graph from an undirected edge list `(i, j, w)`.
    pub fn from_edges(coords: Vec<Point>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = coords.len();
        let mut adjacency = DMatrix::zeros(n, n);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::param(format!("edge ({i}, {j}) out of range for {n} agents")));
            }
            if i == j {
                return Err(Error::param(format!("self-loop at agent {i}")));
            }
            if w.is_nan() || w <= 0.0 {
                return Err(Error::param(format!("edge ({i}, {j}) needs a positive weight")));
            }
            adjacency[(i, j)] = w;
            adjacency[(j, i)] = w;
        }
        WeightedGraph::new(coords, adjacency)
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n()).filter_map(move |j| {
            let w = self.adjacency[(i, j)];
            (w != 0.0).then_some((j, w))
        })
    }

    /// Undirected edges `(i, j, w)` with `i < j`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| {
            ((i + 1)..n).filter_map(move |j| {
                let w = self.adjacency[(i, j)];
                (w != 0.0).then_some((i, j, w))
            })
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    /// Sum of weights of edges incident to `i` (the Laplacian diagonal).
    pub fn weighted_indegree(&self, i: AgentId) -> f64 {
        self.adjacency.column(i.0).iter().sum()
    }

    pub fn weighted_degrees(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.weighted_indegree(AgentId(i))).collect()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut visited = 1;
        while let Some(i) = queue.pop_front() {
            for (j, _) in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    visited += 1;
                    queue.push_back(j);
                }
            }
        }
        visited == n
    }

    /// L = D - A.
    pub fn laplacian(&self) -> LaplacianMatrix {
        let degrees = self.weighted_degrees();
        let mut l = -self.adjacency.clone();
        for (i, d) in degrees.into_iter().enumerate() {
            l[(i, i)] = d;
        }
        LaplacianMatrix(l)
    }
}

/// Draws a random geometric graph on `[0, side]^2`.
///
/// Coordinates are drawn first (x then y per agent), then one weight
/// `weight_max * (1 - u)`, `u ~ U[0, 1)`, per connected unordered pair in
/// row-major order.
pub fn generate_geometric(params: &GeometricParams, seed: u64) -> Result<WeightedGraph> {
    params.validate()?;
    let mut rng = rng_from_seed(seed);
    let n = params.n;
    let coords: Vec<Point> = (0..n)
        .map(|_| {
            let x = params.side * rng.random::<f64>();
            let y = params.side * rng.random::<f64>();
            Point::new(x, y)
        })
        .collect();

    let mut adjacency = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if coords[i].distance(&coords[j]) <= params.radius {
                let w = params.weight_max * (1.0 - rng.random::<f64>());
                adjacency[(i, j)] = w;
                adjacency[(j, i)] = w;
            }
        }
    }
    Ok(WeightedGraph { coords, adjacency })
}

/// Redraws geometric graphs from seed-derived streams until one is connected
/// and `accept` approves it. Returns the graph and the zero-based attempt
/// index that produced it.
pub fn generate_connected_with(
    params: &GeometricParams,
    seed: u64,
    max_attempts: usize,
    mut accept: impl FnMut(&WeightedGraph) -> bool,
) -> Result<(WeightedGraph, usize)> {
    for attempt in 0..max_attempts {
        let g = generate_geometric(params, derive_seed(seed, &[attempt as u64]))?;
        if g.is_connected() && accept(&g) {
            return Ok((g, attempt));
        }
    }
    Err(Error::Disconnected { attempts: max_attempts })
}

pub fn generate_connected(params: &GeometricParams, seed: u64) -> Result<(WeightedGraph, usize)> {
    generate_connected_with(params, seed, MAX_GENERATION_ATTEMPTS, |_| true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(DMatrix<f64>);

impl LaplacianMatrix {
    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.0.row_iter().map(|r| r.sum()).collect()
    }
}

/// Sorted, duplicate-free set of leader agents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LeaderSet(Vec<AgentId>);

impl LeaderSet {
    /// Validates and sorts `ids` as a leader set for a graph with `n` agents.
    pub fn new(ids: impl IntoIterator<Item = usize>, n: usize) -> Result<Self> {
        let mut ids: Vec<usize> = ids.into_iter().collect();
        if ids.is_empty() {
            return Err(Error::param("leader set must be nonempty"));
        }
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::param(format!("duplicate leader {}", w[0])));
        }
        if let Some(&last) = ids.last() {
            if last >= n {
                return Err(Error::param(format!("leader {last} out of range for {n} agents")));
            }
        }
        Ok(LeaderSet(ids.into_iter().map(AgentId).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn members(&self) -> &[AgentId] {
        &self.0
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|a| a.0)
    }

    pub fn to_indices(&self) -> Vec<usize> {
        self.indices().collect()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.binary_search(&AgentId(id)).is_ok()
    }

    /// Agents of `0..n` not in the set, ascending.
    pub fn followers(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&i| !self.contains(i)).collect()
    }

    /// `;`-joined ids, as used in CSV output.
    pub fn joined(&self) -> String {
        self.0.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";")
    }
}

impl fmt::Display for LeaderSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{{}}}",
            self.0.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
        )
    }
}

/// The follower partition of a Laplacian with stubborn leaders.
///
/// Leader rows are identically zero in the dynamics, so only the follower
/// rows `[L_FF | L_FL]` are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedSystem {
    pub follower_ids: Vec<usize>,
    pub leader_ids: Vec<usize>,
    pub lff: DMatrix<f64>,
    pub lfl: DMatrix<f64>,
}

impl GroundedSystem {
    pub fn follower_count(&self) -> usize {
        self.follower_ids.len()
    }
}

pub fn ground(laplacian: &LaplacianMatrix, leaders: &LeaderSet) -> Result<GroundedSystem> {
    let n = laplacian.order();
    if leaders.indices().any(|i| i >= n) {
        return Err(Error::param("leader index exceeds Laplacian order"));
    }
    let follower_ids = leaders.followers(n);
    if follower_ids.is_empty() {
        return Err(Error::NoFollowers);
    }
    let leader_ids = leaders.to_indices();
    let l = laplacian.as_matrix();
    let lff = l.select_rows(&follower_ids).select_columns(&follower_ids);
    let lfl = l.select_rows(&follower_ids).select_columns(&leader_ids);
    Ok(GroundedSystem {
        follower_ids,
        leader_ids,
        lff,
        lfl,
    })
}
