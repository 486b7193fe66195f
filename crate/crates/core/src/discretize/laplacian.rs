//! Flux-form Laplace–Beltrami operator `Δ = -div grad` on warped products.
//!
//! Each node owns a control volume: length `h` in `t` (`h/2` on a truncation
//! ring) times one cross-section cell. The symmetric stiffness matrix `K` is
//! the discrete Dirichlet form, `μ` the diagonal node measure, and the open
//! stencil is `Δ = μ⁻¹ K` on every node except the truncation rings, whose
//! closure belongs to the caller.

use crate::geometry::Manifold;

use super::grid::{CrossMesh, Grid};
use super::solvers::{solve_spd, CgOptions, CgSolution};
use super::sparse::{SparseOperator, TripletBuilder};
use super::SolverError;

#[derive(Debug, Clone)]
pub struct LaplaceBeltrami {
    /// Symmetric Dirichlet form with natural (zero-flux) closure on the truncation rings.
    pub stiffness: SparseOperator,
    /// Node measure `μ`; sums to the volume of the truncated manifold.
    pub mass: Vec<f64>,
    /// `Δ` on non-boundary nodes; boundary rows are empty.
    pub open: SparseOperator,
    /// Area of the truncation face owned by each boundary node (zero elsewhere).
    pub face_area: Vec<f64>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    k_interior: SparseOperator,
}

fn ring_length(grid: &Grid, i: usize) -> f64 {
    if grid.boundary_end_of_ring(i).is_some() {
        0.5 * grid.h_t()
    } else {
        grid.h_t()
    }
}

/// Diagonal node measure of the built manifold.
pub fn node_measure(m: &Manifold) -> Vec<f64> {
    let grid = &m.grid;
    let cross = grid.cross();
    let d = cross.dim() as i32;
    let cell = cross.cell_measure();
    let mut mass = vec![0.0; grid.len()];
    for (n, mu) in mass.iter_mut().enumerate() {
        let (i, _) = grid.ring_of(n);
        *mu = if grid.has_tip() && i == 0 {
            // polar cap of radius h/2 around the tip
            cell * cross.size() as f64 * m.spec.warp.integral(0.0, 0.5 * grid.h_t())
        } else {
            ring_length(grid, i) * cell * m.metric.warp[i].powi(d)
        };
    }
    mass
}

/// Assembles `K`, `μ` and the open stencil for a built manifold.
pub fn assemble_laplacian(m: &Manifold) -> Result<LaplaceBeltrami, SolverError> {
    let grid = &m.grid;
    let cross = grid.cross();
    let d = cross.dim() as i32;
    let cell = cross.cell_measure();
    let h = grid.h_t();
    let ht = cross.h_theta();
    let t = grid.t_nodes();
    let warp = &m.spec.warp;
    let n = grid.len();
    let msz = cross.size();

    for (i, w) in m.metric.warp.iter().enumerate() {
        if !(grid.has_tip() && i == 0) && *w <= 0.0 {
            return Err(SolverError::SingularMetric { t: t[i] });
        }
    }

    let mut kb = TripletBuilder::new(n, n);
    let mut connect = |a: usize, b: usize, k: f64| {
        kb.push(a, a, k);
        kb.push(b, b, k);
        kb.push(a, b, -k);
        kb.push(b, a, -k);
    };

    for i in 0..t.len() - 1 {
        let wf = warp.value(0.5 * (t[i] + t[i + 1]));
        if wf <= 0.0 {
            return Err(SolverError::SingularMetric {
                t: 0.5 * (t[i] + t[i + 1]),
            });
        }
        let kappa = cell * wf.powi(d) / h;
        for j in 0..msz {
            connect(grid.node(i, j), grid.node(i + 1, j), kappa);
        }
    }

    for i in 0..t.len() {
        if grid.has_tip() && i == 0 {
            continue;
        }
        let w = m.metric.warp[i];
        let len = ring_length(grid, i);
        for (k, r) in cross.radii().iter().enumerate() {
            let coef = len * cell * w.powi(d - 2) / (r * r * ht * ht);
            for j in 0..msz {
                let jn = cross.neighbor(j, k, true);
                connect(grid.node(i, j), grid.node(i, jn), coef);
            }
        }
    }

    let stiffness = kb.build().into_symmetric(1e-13)?;
    let mass = node_measure(m);

    let boundary: Vec<usize> = (0..n).filter(|&v| grid.is_boundary(v)).collect();
    let interior: Vec<usize> = (0..n).filter(|&v| !grid.is_boundary(v)).collect();
    let scale: Vec<f64> = (0..n)
        .map(|v| if grid.is_boundary(v) { 0.0 } else { 1.0 / mass[v] })
        .collect();
    let open = drop_zero_rows(&stiffness.scale_rows(&scale), &scale);

    let mut face_area = vec![0.0; n];
    for end in 0..m.end_count() {
        let i = grid.boundary_ring(end);
        let a = cell * m.metric.warp[i].powi(d);
        for v in grid.boundary_nodes(end) {
            face_area[v] = a;
        }
    }

    let k_interior = stiffness.principal_submatrix(&interior);
    Ok(LaplaceBeltrami {
        stiffness,
        mass,
        open,
        face_area,
        interior,
        boundary,
        k_interior,
    })
}

fn drop_zero_rows(a: &SparseOperator, scale: &[f64]) -> SparseOperator {
    let mut b = TripletBuilder::new(a.nrows(), a.ncols());
    for (i, s) in scale.iter().enumerate() {
        if *s != 0.0 {
            for (j, v) in a.row(i) {
                b.push(i, j, v);
            }
        }
    }
    b.build()
}

/// Interior values and solver metadata of a Dirichlet solve.
#[derive(Debug, Clone)]
pub struct DirichletSolution {
    pub u: Vec<f64>,
    pub cg: CgSolution,
}

impl LaplaceBeltrami {
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.open.matvec(f)
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    /// `⟨f, g⟩` in the discrete `L²(μ)` inner product over all nodes.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.mass.iter().zip(f).zip(g).map(|((m, a), b)| m * a * b).sum()
    }

    /// `⟨Δf, g⟩` summed over the nodes where the open stencil is defined.
    pub fn pairing(&self, f: &[f64], g: &[f64]) -> f64 {
        let kf = self.stiffness.matvec(f);
        self.interior.iter().map(|&v| kf[v] * g[v]).sum()
    }

    /// Solves `Δu = source` on non-boundary nodes with `u = boundary` on the
    /// truncation rings. Only the boundary entries of `boundary` are read.
    pub fn solve_dirichlet(
        &self,
        source: &[f64],
        boundary: &[f64],
        opts: &CgOptions,
    ) -> Result<DirichletSolution, SolverError> {
        let mut ub = vec![0.0; self.mass.len()];
        for &v in &self.boundary {
            ub[v] = boundary[v];
        }
        let coupling = self.stiffness.matvec(&ub);
        let rhs: Vec<f64> = self
            .interior
            .iter()
            .map(|&v| self.mass[v] * source[v] - coupling[v])
            .collect();
        let cg = solve_spd(&self.k_interior, &rhs, opts)?;
        let mut u = ub;
        for (k, &v) in self.interior.iter().enumerate() {
            u[v] = cg.x[k];
        }
        Ok(DirichletSolution { u, cg })
    }
}

/// Positive discrete Laplacian of a flat cross-section mesh (uniform measure,
/// so the matrix itself is symmetric).
pub fn cross_section_laplacian(cross: &CrossMesh) -> SparseOperator {
    let m = cross.size();
    let ht = cross.h_theta();
    let mut b = TripletBuilder::new(m, m);
    for (k, r) in cross.radii().iter().enumerate() {
        let c = 1.0 / (r * r * ht * ht);
        for j in 0..m {
            let jn = cross.neighbor(j, k, true);
            b.push(j, j, c);
            b.push(jn, jn, c);
            b.push(j, jn, -c);
            b.push(jn, j, -c);
        }
    }
    b.build()
        .into_symmetric(1e-13)
        .expect("stencil is symmetric by construction")
}
