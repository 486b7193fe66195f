//! Checks on `γ = df`: covariant derivative, Weitzenböck and Bochner
//! identities, and the gradient-flow product test. Surfaces only
//! (circle cross-sections).

pub mod bochner;
pub mod flow;
pub mod forms;

use thiserror::Error;

use crate::geometry::{CrossSection, GeometryError, Manifold, Topology};
use crate::harmonic::HarmonicError;

pub use bochner::{bochner_identity, boundary_decay_scan, dichotomy_sweep, BochnerReport, DecayScan, DichotomyReport};
pub use flow::{gradient_flow, split_check, FlowOptions, GridInterpolant, SplitReport};
pub use forms::{covariant_derivative, differential, weitzenbock_residual, CovariantDerivative, OneForm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("verification needs a two-dimensional model with a circle cross-section")]
    NotTwoDimensional,
    #[error("radius {r} is beyond the usable range (max {max})")]
    RadiusOutOfRange { r: f64, max: f64 },
    #[error("|df| = {norm:.3e} below {threshold:.0e} at t = {t}, θ = {theta}")]
    CriticalPoint { norm: f64, threshold: f64, t: f64, theta: f64 },
    #[error("flow left the grid at t = {t}")]
    LeftDomain { t: f64 },
    #[error("no point of the level set f = {level} on the ray θ = {theta}")]
    NoLevelPoint { level: f64, theta: f64 },
    #[error("step size underflow in the flow integrator at s = {s}")]
    StepUnderflow { s: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
}

pub(crate) fn require_surface(m: &Manifold) -> Result<f64, VerifyError> {
    match m.spec.cross_section {
        CrossSection::Circle { radius, .. } => Ok(radius),
        _ => Err(VerifyError::NotTwoDimensional),
    }
}

/// First and last ring where nested centered differences are trusted:
/// two rings in from each truncation boundary, and `t ≥ 1` on a capped
/// model, whose polar coordinates degenerate at the tip.
pub fn evaluation_rings(m: &Manifold) -> (usize, usize) {
    let g = &m.grid;
    let n = g.rings();
    let first = match m.spec.topology {
        Topology::TwoEndCylinder => 2,
        Topology::OneEndCapped => g.t_nodes().iter().position(|&t| t >= 1.0 - 1e-12).unwrap_or(n).max(2),
    };
    (first, n - 3)
}
