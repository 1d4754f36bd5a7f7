//! Grounded-Laplacian spectrum and the leader-follower equilibrium.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::GroundedSystem;

/// Relative accuracy required of eigenvalue and linear-solve results.
pub const EIGEN_TOLERANCE: f64 = 1e-9;

/// Absolute symmetry slack accepted by [`SymmetricMatrix::new`], scaled by
/// `max(1, max|a_ij|)`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::param(format!(
                "matrix is {}x{}, not square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.is_empty() {
            return Err(Error::param("matrix has order 0"));
        }
        let scale = m.amax().max(1.0);
        let n = m.nrows();
        let mut max_asymmetry = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                max_asymmetry = max_asymmetry.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if max_asymmetry > SYMMETRY_TOLERANCE * scale {
            return Err(Error::NotSymmetric { max_asymmetry });
        }
        Ok(SymmetricMatrix(m))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.0.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.0.clone().symmetric_eigenvalues()
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.eigenvalues().min()
    }

    pub fn largest_eigenvalue(&self) -> f64 {
        self.eigenvalues().max()
    }
}

pub fn smallest_eigenvalue(m: &SymmetricMatrix) -> f64 {
    m.smallest_eigenvalue()
}

/// The convergence rate of a grounded system: lambda_min(L_FF).
pub fn convergence_rate(sys: &GroundedSystem) -> Result<f64> {
    if sys.follower_ids.is_empty() {
        return Err(Error::NoFollowers);
    }
    Ok(SymmetricMatrix::new(sys.lff.clone())?.smallest_eigenvalue())
}

/// Largest eigenvalue of L_FF; explicit Euler with step `t_s` is stable iff
/// `t_s * lambda_max < 2`.
pub fn follower_spectral_radius(sys: &GroundedSystem) -> Result<f64> {
    if sys.follower_ids.is_empty() {
        return Err(Error::NoFollowers);
    }
    Ok(SymmetricMatrix::new(sys.lff.clone())?.largest_eigenvalue())
}

/// Equilibrium of one coordinate axis: followers solved, leaders copied.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitState {
    pub x_star: Vec<f64>,
}

impl LimitState {
    /// `||L_FF x_F* + L_FL x_L||_2`.
    pub fn residual(&self, sys: &GroundedSystem) -> f64 {
        let xf = DVector::from_iterator(sys.follower_ids.len(), sys.follower_ids.iter().map(|&i| self.x_star[i]));
        let xl = DVector::from_iterator(sys.leader_ids.len(), sys.leader_ids.iter().map(|&i| self.x_star[i]));
        (&sys.lff * xf + &sys.lfl * xl).norm()
    }
}

/// Solves `L_FF x_F* = -L_FL x_L` directly, with `x_L` read from `initial`.
pub fn limit_state(sys: &GroundedSystem, initial: &[f64]) -> Result<LimitState> {
    let n = sys.follower_ids.len() + sys.leader_ids.len();
    if initial.len() != n {
        return Err(Error::param(format!(
            "initial state has {} entries, expected {n}",
            initial.len()
        )));
    }
    if sys.follower_ids.is_empty() {
        return Err(Error::NoFollowers);
    }
    let lff = SymmetricMatrix::new(sys.lff.clone())?;
    // A follower component with no path to a leader makes L_FF singular.
    if lff.smallest_eigenvalue() <= EIGEN_TOLERANCE * (1.0 + lff.norm_inf()) {
        return Err(Error::UnreachableFollowers);
    }
    let chol = sys.lff.clone().cholesky().ok_or(Error::UnreachableFollowers)?;
    let xl = DVector::from_iterator(sys.leader_ids.len(), sys.leader_ids.iter().map(|&i| initial[i]));
    let rhs = -(&sys.lfl * xl);
    let xf = chol.solve(&rhs);

    let mut x_star = initial.to_vec();
    for (r, &i) in sys.follower_ids.iter().enumerate() {
        x_star[i] = xf[r];
    }
    Ok(LimitState { x_star })
}
