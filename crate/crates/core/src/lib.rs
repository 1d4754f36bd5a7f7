//! Leader selection for linear consensus multi-agent systems.
//!
//! Agents scattered in a square are linked when close enough, with random
//! symmetric weights. A subset of `k` agents is chosen as stubborn leaders;
//! the remaining followers run `x' = -L x` and settle at the harmonic
//! extension of the leaders' positions. How fast they get there is governed
//! by the smallest eigenvalue of the grounded Laplacian `L_FF`.
//!
//! * [`graph`]: geometric graph generation, Laplacians, grounding
//! * [`spectral`]: `lambda_min(L_FF)` and the equilibrium state
//! * [`selection`]: the six leader-selection algorithms
//! * [`dynamics`]: free and speed-capped Euler simulation, convergence time
//! * [`experiments`]: seeded repeated-trial sweeps and their reports
//! * [`format`]: graph and matrix text files

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod format;
pub mod graph;
pub mod rng;
pub mod selection;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{AgentId, GeometricParams, GroundedSystem, LaplacianMatrix, LeaderSet, Point, WeightedGraph};
pub use selection::{Algorithm, SelectionParams, SelectionRecord};
