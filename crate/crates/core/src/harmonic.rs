//! Harmonic functions with prescribed linear asymptotics on each end.
//!
//! Pipeline: an interpolant `f₀` equal to `C_i t_i + D_i` on end `i`, the
//! obstruction map `Φ` pairing `Δf₀` with the harmonic functions of at most
//! linear growth, and a decaying correction `f′` with `Δf′ = -Δf₀` for data
//! in `Ker Φ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::norms::{extend_rho, weighted_norm, WeightedNorm};
use crate::discretize::{assemble_laplacian, CgOptions, LaplaceBeltrami, SolverError};
use crate::geometry::{build_manifold, GeometryError, Manifold, ManifoldSpec, Topology};
use crate::spectral::{spectral_gap, SpectralError};

/// Singular values below this fraction of the largest count as null.
pub const NULL_THRESHOLD: f64 = 1e-6;
/// Relative distance a data vector may sit from `Ker Φ` and still be accepted.
pub const PROJECTION_TOL: f64 = 1e-6;
/// Slack factor in the `e^{αR}` bounds on fits and decay.
pub const DECAY_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarmonicError {
    #[error("expected {expected} asymptotic entries, got {got}")]
    DataLength { expected: usize, got: usize },
    #[error("cutoff ramp [{start}, {end}] does not fit inside the truncated ends (R = {r})")]
    RampTooWide { start: f64, end: f64, r: f64 },
    #[error("weight {alpha} is outside the spectral gap (-{gap}, 0)")]
    WeightOutsideGap { alpha: f64, gap: f64 },
    #[error("asymptotic fit residual {residual:.3e} exceeds {bound:.3e}; truncation too short")]
    FitResidual { residual: f64, bound: f64 },
    #[error("harmonic basis is numerically dependent (Gram ratio {ratio:.3e})")]
    DependentBasis { ratio: f64 },
    #[error("obstruction map has nullity {nullity}, expected {expected}")]
    NullityMismatch { nullity: usize, expected: usize },
    #[error("data lies off Ker Φ: pairings {pairings:?} (relative distance {distance:.3e})")]
    NotInKernel { pairings: Vec<f64>, distance: f64 },
    #[error("single end with slope {slope}: outward flux {obstruction} cannot be balanced")]
    Obstructed { slope: f64, obstruction: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Per-end slopes and offsets in end coordinates `t_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticData {
    pub slopes: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl AsymptoticData {
    pub fn new(slopes: Vec<f64>, offsets: Vec<f64>) -> Result<Self, HarmonicError> {
        if slopes.len() != offsets.len() {
            return Err(HarmonicError::DataLength {
                expected: slopes.len(),
                got: offsets.len(),
            });
        }
        Ok(AsymptoticData { slopes, offsets })
    }

    /// From `(C_1, D_1, …, C_ℓ, D_ℓ)`.
    pub fn from_vector(v: &[f64]) -> Result<Self, HarmonicError> {
        if v.len() % 2 != 0 {
            return Err(HarmonicError::DataLength {
                expected: v.len() + 1,
                got: v.len(),
            });
        }
        Ok(AsymptoticData {
            slopes: v.iter().step_by(2).copied().collect(),
            offsets: v.iter().skip(1).step_by(2).copied().collect(),
        })
    }

    pub fn to_vector(&self) -> Vec<f64> {
        self.slopes
            .iter()
            .zip(&self.offsets)
            .flat_map(|(&c, &d)| [c, d])
            .collect()
    }

    pub fn ends(&self) -> usize {
        self.slopes.len()
    }

    fn unit(ends: usize, k: usize) -> Self {
        let mut v = vec![0.0; 2 * ends];
        v[k] = 1.0;
        AsymptoticData::from_vector(&v).expect("even length")
    }
}

fn check_len(m: &Manifold, data: &AsymptoticData) -> Result<(), HarmonicError> {
    if data.ends() != m.end_count() {
        return Err(HarmonicError::DataLength {
            expected: 2 * m.end_count(),
            got: 2 * data.ends(),
        });
    }
    Ok(())
}

/// `6x⁵ - 15x⁴ + 10x³` clamped to `[0, 1]`: a C² step.
pub fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}

#[derive(Debug, Clone)]
pub struct InterpolantF0 {
    pub values: Vec<f64>,
    pub data: AsymptoticData,
    /// Cutoff ramp `[start, end]` in global `t`.
    pub ramp: (f64, f64),
}

/// Builds `f₀`, exactly linear in `t_i` beyond the core on each end.
pub fn build_f0(m: &Manifold, data: &AsymptoticData) -> Result<InterpolantF0, HarmonicError> {
    check_len(m, data)?;
    let tc = m.spec.core_radius;
    let r = m.spec.truncation_r;
    let h = m.grid.h_t();
    if tc + 4.0 * h > r {
        return Err(HarmonicError::RampTooWide { start: -tc, end: tc, r });
    }
    let (ramp, profile): ((f64, f64), Box<dyn Fn(f64) -> f64>) = match m.spec.topology {
        Topology::TwoEndCylinder => {
            let (c1, d1, c2, d2) = (data.slopes[0], data.offsets[0], data.slopes[1], data.offsets[1]);
            (
                (-tc, tc),
                Box::new(move |t| {
                    let chi = smoothstep((t + tc) / (2.0 * tc));
                    chi * (c1 * t + d1) + (1.0 - chi) * (-c2 * t + d2)
                }),
            )
        }
        Topology::OneEndCapped => {
            let (c1, d1) = (data.slopes[0], data.offsets[0]);
            (
                (0.5 * tc, tc),
                Box::new(move |t| d1 + smoothstep((t - 0.5 * tc) / (0.5 * tc)) * c1 * t),
            )
        }
    };
    Ok(InterpolantF0 {
        values: m.grid.sample(|t, _| profile(t)),
        data: data.clone(),
        ramp,
    })
}

fn ring_means(m: &Manifold, f: &[f64]) -> Vec<f64> {
    let g = &m.grid;
    (0..g.rings())
        .map(|i| {
            let n = if g.has_tip() && i == 0 { 1 } else { g.ring_size() };
            (0..n).map(|j| f[g.node(i, j)]).sum::<f64>() / n as f64
        })
        .collect()
}

/// Least-squares line `a·t_e + b` through the ring means of `f` over the
/// outer quarter of end `end`; returns `(a, b, rms residual)`.
pub fn fit_end_asymptotics(m: &Manifold, f: &[f64], end: usize) -> (f64, f64, f64) {
    let means = ring_means(m, f);
    let sign = m.grid.end_orientation(end);
    let r = m.spec.truncation_r;
    let pts: Vec<(f64, f64)> = m
        .grid
        .t_nodes()
        .iter()
        .zip(&means)
        .map(|(&t, &v)| (sign * t, v))
        .filter(|&(te, _)| te >= 0.75 * r - 1e-12)
        .collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let rms = (pts.iter().map(|p| (a * p.0 + b - p.1).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, rms)
}

pub fn fit_asymptotics(m: &Manifold, f: &[f64]) -> (AsymptoticData, f64) {
    let fits: Vec<_> = (0..m.end_count()).map(|e| fit_end_asymptotics(m, f, e)).collect();
    let residual = fits.iter().map(|x| x.2).fold(0.0, f64::max);
    let data = AsymptoticData {
        slopes: fits.iter().map(|x| x.0).collect(),
        offsets: fits.iter().map(|x| x.1).collect(),
    };
    (data, residual)
}

/// Harmonic functions of at most linear growth, one per end.
#[derive(Debug, Clone)]
pub struct CokernelBasis {
    pub functions: Vec<Vec<f64>>,
    pub asymptotics: Vec<AsymptoticData>,
    /// `‖Δh_j‖_∞` over non-boundary nodes.
    pub residuals: Vec<f64>,
    pub fit_residuals: Vec<f64>,
    /// Smallest over largest eigenvalue of the `L²` Gram matrix.
    pub gram_ratio: f64,
    pub cg_iterations: usize,
}

fn sup_interior(lap: &LaplaceBeltrami, f: &[f64]) -> f64 {
    let df = lap.apply(f);
    lap.interior_nodes().iter().map(|&v| df[v].abs()).fold(0.0, f64::max)
}

/// `h_1 ≡ 1`; for two ends `h_2` is the harmonic function equal to `±1` on
/// the two truncation rings, made `L²`-orthogonal to constants and scaled to
/// unit slope on end 0.
pub fn cokernel_basis(
    m: &Manifold,
    lap: &LaplaceBeltrami,
    alpha: f64,
) -> Result<CokernelBasis, HarmonicError> {
    let gap = spectral_gap(&m.spec)?;
    if !(alpha < 0.0 && alpha > -gap) {
        return Err(HarmonicError::WeightOutsideGap { alpha, gap });
    }
    let ends = m.end_count();
    let n = m.grid.len();
    let ones = vec![1.0; n];
    let mut functions = vec![ones.clone()];
    let mut cg_iterations = 0;
    let opts = CgOptions::with_tol(1e-12);
    for e in 0..ends.saturating_sub(1) {
        // u_e - u_last is ±1 on the two boundary rings
        let mut bc = vec![0.0; n];
        for v in m.grid.boundary_nodes(e) {
            bc[v] = 1.0;
        }
        for v in m.grid.boundary_nodes(ends - 1) {
            bc[v] = -1.0;
        }
        let sol = lap.solve_dirichlet(&vec![0.0; n], &bc, &opts)?;
        cg_iterations += sol.cg.iterations;
        let mut h = sol.u;
        for prev in &functions {
            let c = lap.inner(&h, prev) / lap.inner(prev, prev);
            h.iter_mut().zip(prev).for_each(|(x, p)| *x -= c * p);
        }
        let (a, _, _) = fit_end_asymptotics(m, &h, e);
        h.iter_mut().for_each(|x| *x /= a);
        functions.push(h);
    }

    let mut asymptotics = Vec::new();
    let mut fit_residuals = Vec::new();
    let bound = (alpha * m.spec.truncation_r).exp() * DECAY_MARGIN;
    for h in &functions {
        let (data, res) = fit_asymptotics(m, h);
        let scale = h.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
        if res > bound * scale {
            return Err(HarmonicError::FitResidual {
                residual: res,
                bound: bound * scale,
            });
        }
        asymptotics.push(data);
        fit_residuals.push(res);
    }
    let residuals = functions.iter().map(|h| sup_interior(lap, h)).collect();

    let k = functions.len();
    let gram = DMatrix::from_fn(k, k, |i, j| lap.inner(&functions[i], &functions[j]));
    let eig = gram.symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    let gram_ratio = lo / hi;
    if !(gram_ratio > 1e-12) {
        return Err(HarmonicError::DependentBasis { ratio: gram_ratio });
    }
    Ok(CokernelBasis {
        functions,
        asymptotics,
        residuals,
        fit_residuals,
        gram_ratio,
        cg_iterations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstructionMatrix {
    /// Row `j`, column `k`: `⟨Δf₀(e_k), h_j⟩` for the unit data vector `e_k`.
    pub rows: Vec<Vec<f64>>,
    /// Singular values of `Φ` padded to a square `2ℓ × 2ℓ` matrix, descending.
    pub singular_values: Vec<f64>,
    /// Orthonormal basis of `Ker Φ` as `2ℓ`-vectors.
    pub nullspace: Vec<Vec<f64>>,
    pub nullity: usize,
    pub rank: usize,
    /// `σ_ℓ / max(σ_{ℓ+1}, ε·σ_1)`.
    pub gap: f64,
}

impl ObstructionMatrix {
    pub fn ends(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Orthogonal projection onto `Ker Φ`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for n in &self.nullspace {
            let c: f64 = n.iter().zip(v).map(|(a, b)| a * b).sum();
            out.iter_mut().zip(n).for_each(|(o, x)| *o += c * x);
        }
        out
    }

    /// Offsets completing the given slopes to admissible data, if any.
    pub fn admissible_offsets(&self, slopes: &[f64]) -> Option<Vec<f64>> {
        let l = self.ends();
        let k = self.nullspace.len();
        let nc = DMatrix::from_fn(l, k, |i, j| self.nullspace[j][2 * i]);
        let c = nalgebra::DVector::from_column_slice(slopes);
        let svd = nc.clone().svd(true, true);
        let y = svd.solve(&c, 1e-10).ok()?;
        let recon = &nc * &y;
        if (recon - &c).norm() > 1e-8 * c.norm().max(1.0) {
            return None;
        }
        Some((0..l).map(|i| (0..k).map(|j| self.nullspace[j][2 * i + 1] * y[j]).sum()).collect())
    }
}

/// `Φ` from the unit data vectors, with SVD and numerical nullspace.
pub fn assemble_phi(
    m: &Manifold,
    lap: &LaplaceBeltrami,
    basis: &CokernelBasis,
) -> Result<ObstructionMatrix, HarmonicError> {
    let l = m.end_count();
    let mut rows = vec![vec![0.0; 2 * l]; basis.functions.len()];
    for k in 0..2 * l {
        let f0 = build_f0(m, &AsymptoticData::unit(l, k))?;
        for (j, h) in basis.functions.iter().enumerate() {
            rows[j][k] = lap.pairing(&f0.values, h);
        }
    }
    let n = 2 * l;
    let padded = DMatrix::from_fn(n, n, |i, j| if i < rows.len() { rows[i][j] } else { 0.0 });
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = sv[0];
    let rank = sv.iter().filter(|&&s| s > NULL_THRESHOLD * smax).count();
    let nullspace: Vec<Vec<f64>> = order[rank..]
        .iter()
        .map(|&i| v_t.row(i).iter().copied().collect())
        .collect();
    let floor = f64::EPSILON * smax;
    let gap = if l < n { sv[l - 1] / sv[l].max(floor) } else { f64::INFINITY };
    Ok(ObstructionMatrix {
        rows,
        singular_values: sv,
        nullity: n - rank,
        rank,
        nullspace,
        gap,
    })
}

/// Assembled operators and obstruction data for one manifold and weight.
#[derive(Debug, Clone)]
pub struct HarmonicProblem {
    pub manifold: Manifold,
    pub laplacian: LaplaceBeltrami,
    pub alpha: f64,
    pub basis: CokernelBasis,
    pub phi: ObstructionMatrix,
}

impl HarmonicProblem {
    pub fn new(spec: &ManifoldSpec, alpha: f64) -> Result<Self, HarmonicError> {
        let manifold = build_manifold(spec)?;
        let laplacian = assemble_laplacian(&manifold)?;
        let basis = cokernel_basis(&manifold, &laplacian, alpha)?;
        let phi = assemble_phi(&manifold, &laplacian, &basis)?;
        Ok(HarmonicProblem {
            manifold,
            laplacian,
            alpha,
            basis,
            phi,
        })
    }

    /// `Err` when the numerical nullity differs from the number of ends.
    pub fn check_nullity(&self) -> Result<(), HarmonicError> {
        let expected = self.manifold.end_count();
        if self.phi.nullity != expected {
            return Err(HarmonicError::NullityMismatch {
                nullity: self.phi.nullity,
                expected,
            });
        }
        Ok(())
    }

    /// `-⟨Δf₀, 1⟩`: the total outward flux of `f₀`.
    pub fn outward_flux(&self, f0: &InterpolantF0) -> f64 {
        -self.laplacian.pairing(&f0.values, &self.basis.functions[0])
    }

    /// `Σ C_i vol(X_i)` with the cross-section measured at the truncation face.
    pub fn expected_flux(&self, data: &AsymptoticData) -> f64 {
        data.slopes
            .iter()
            .enumerate()
            .map(|(e, c)| c * self.manifold.boundary_face_volume(e))
            .sum()
    }

    pub fn solve(&self, data: &AsymptoticData, opts: &HarmonicOptions) -> Result<HarmonicSolution, HarmonicError> {
        solve_harmonic_with(self, data, opts)
    }
}

pub fn phi_nullity(spec: &ManifoldSpec, alpha: f64) -> Result<usize, HarmonicError> {
    Ok(HarmonicProblem::new(spec, alpha)?.phi.nullity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// `f′ = 0` on the truncation rings.
    #[default]
    Dirichlet,
    /// `∂_t f′ = α f′` outward on the truncation rings.
    Robin,
}

#[derive(Debug, Clone)]
pub struct HarmonicOptions {
    pub auto_project: bool,
    pub closure: Closure,
    pub cg: CgOptions,
}

impl Default for HarmonicOptions {
    fn default() -> Self {
        HarmonicOptions {
            auto_project: false,
            closure: Closure::Dirichlet,
            cg: CgOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Correction {
    pub values: Vec<f64>,
    pub cg_iterations: usize,
    pub relative_residual: f64,
}

/// Solves `Δf′ = -Δf₀` with a decaying closure after checking that `Δf₀`
/// pairs to zero with the harmonic basis.
pub fn solve_correction(
    problem: &HarmonicProblem,
    f0: &InterpolantF0,
    closure: Closure,
    cg: &CgOptions,
) -> Result<Correction, HarmonicError> {
    let pairings = problem.phi.apply(&f0.data.to_vector());
    let norm = f0.data.to_vector().iter().map(|x| x * x).sum::<f64>().sqrt();
    let allowed = PROJECTION_TOL * problem.phi.sigma_max() * norm;
    if pairings.iter().any(|p| p.abs() > allowed) {
        let distance = pairings.iter().map(|p| p * p).sum::<f64>().sqrt()
            / (problem.phi.sigma_max() * norm).max(f64::MIN_POSITIVE);
        return Err(HarmonicError::NotInKernel { pairings, distance });
    }
    let lap = &problem.laplacian;
    let kf0 = lap.stiffness.matvec(&f0.values);
    match closure {
        Closure::Dirichlet => {
            let n = kf0.len();
            let source: Vec<f64> = (0..n)
                .map(|v| if lap.mass[v] > 0.0 { -kf0[v] / lap.mass[v] } else { 0.0 })
                .collect();
            let sol = lap.solve_dirichlet(&source, &vec![0.0; n], cg)?;
            Ok(Correction {
                values: sol.u,
                cg_iterations: sol.cg.iterations,
                relative_residual: sol.cg.relative_residual,
            })
        }
        Closure::Robin => {
            let grid = &problem.manifold.grid;
            let shift: Vec<f64> = lap.face_area.iter().map(|a| -problem.alpha * a).collect();
            let a = lap.stiffness.add_diagonal(&shift);
            let mut rhs: Vec<f64> = kf0.iter().map(|x| -x).collect();
            for (e, &c) in f0.data.slopes.iter().enumerate() {
                for v in grid.boundary_nodes(e) {
                    rhs[v] += lap.face_area[v] * c;
                }
            }
            let sol = crate::discretize::solve_spd(&a, &rhs, cg)?;
            Ok(Correction {
                values: sol.x,
                cg_iterations: sol.iterations,
                relative_residual: sol.relative_residual,
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayCheck {
    pub end: usize,
    /// `sup |f - (C t_e + D)|` over the outer quarter of the end.
    pub sup: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarmonicSolution {
    #[serde(skip)]
    pub f: Vec<f64>,
    #[serde(skip)]
    pub f0: Vec<f64>,
    #[serde(skip)]
    pub f_prime: Vec<f64>,
    pub requested: AsymptoticData,
    /// Data actually solved for, after any projection onto `Ker Φ`.
    pub data: AsymptoticData,
    pub achieved: AsymptoticData,
    pub laplacian_residual: f64,
    pub correction_norm: WeightedNorm,
    pub cg_iterations: usize,
    pub cg_relative_residual: f64,
    pub decay: Vec<DecayCheck>,
}

pub fn solve_harmonic(
    spec: &ManifoldSpec,
    data: &AsymptoticData,
    alpha: f64,
    opts: &HarmonicOptions,
) -> Result<HarmonicSolution, HarmonicError> {
    HarmonicProblem::new(spec, alpha)?.solve(data, opts)
}

fn solve_harmonic_with(
    p: &HarmonicProblem,
    requested: &AsymptoticData,
    opts: &HarmonicOptions,
) -> Result<HarmonicSolution, HarmonicError> {
    let m = &p.manifold;
    check_len(m, requested)?;
    if m.end_count() == 1 && requested.slopes[0] != 0.0 {
        let f0 = build_f0(m, requested)?;
        return Err(HarmonicError::Obstructed {
            slope: requested.slopes[0],
            obstruction: p.outward_flux(&f0),
        });
    }
    let v = requested.to_vector();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let projected = p.phi.project(&v);
    let distance = v.iter().zip(&projected).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        / norm.max(f64::MIN_POSITIVE);
    let data = if distance <= PROJECTION_TOL {
        requested.clone()
    } else if opts.auto_project {
        AsymptoticData::from_vector(&projected)?
    } else {
        return Err(HarmonicError::NotInKernel {
            pairings: p.phi.apply(&v),
            distance,
        });
    };

    let f0 = build_f0(m, &data)?;
    let corr = solve_correction(p, &f0, opts.closure, &opts.cg)?;
    let f: Vec<f64> = f0.values.iter().zip(&corr.values).map(|(a, b)| a + b).collect();
    let (achieved, _) = fit_asymptotics(m, &f);

    let r = m.spec.truncation_r;
    let bound = DECAY_MARGIN * (p.alpha * 0.75 * r).exp();
    let t = m.grid.node_t();
    let decay = (0..m.end_count())
        .map(|e| {
            let s = m.grid.end_orientation(e);
            let sup = t
                .iter()
                .zip(&f)
                .filter(|(&tv, _)| s * tv >= 0.75 * r - 1e-12)
                .map(|(&tv, &fv)| (fv - data.slopes[e] * s * tv - data.offsets[e]).abs())
                .fold(0.0, f64::max);
            DecayCheck {
                end: e,
                sup,
                bound,
                passed: sup <= bound,
            }
        })
        .collect();
    let wt = extend_rho(m, 1.0, p.alpha, 2.0);
    Ok(HarmonicSolution {
        laplacian_residual: sup_interior(&p.laplacian, &f),
        correction_norm: weighted_norm(m, &corr.values, &wt, 1),
        cg_iterations: corr.cg_iterations,
        cg_relative_residual: corr.relative_residual,
        requested: requested.clone(),
        data,
        achieved,
        decay,
        f,
        f0: f0.values,
        f_prime: corr.values,
    })
}
