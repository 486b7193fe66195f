//! Grids, sparse operators and linear/eigen solvers.

pub mod eigen;
pub mod fd;
pub mod grid;
pub mod laplacian;
pub mod norms;
pub mod solvers;
pub mod sparse;

use thiserror::Error;

pub use eigen::{eigen_smallest, EigenPair};
pub use grid::{CrossMesh, Grid, NodeKind};
pub use laplacian::{assemble_laplacian, cross_section_laplacian, node_measure, LaplaceBeltrami};
pub use norms::{extend_rho, weighted_norm, WeightFunction, WeightedNorm};
pub use solvers::{solve_least_squares, solve_spd, CgOptions, CgSolution};
pub use sparse::{SparseOperator, TripletBuilder};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("operator is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("right-hand side has kernel component {component:.3e}")]
    NotOrthogonalToKernel { component: f64 },
    #[error("iteration stalled after {iterations} steps at residual {residual:.3e}")]
    Stalled { iterations: usize, residual: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("system is rank deficient (nullity {nullity})")]
    RankDeficient { nullity: usize },
    #[error("eigenpairs not converged, residuals {residuals:?}")]
    EigenNotConverged { residuals: Vec<f64> },
    #[error("metric degenerates at t = {t}")]
    SingularMetric { t: f64 },
}
