//! Conjugate gradients and normal-equation least squares.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::sparse::SparseOperator;
use super::SolverError;

#[derive(Debug, Clone)]
pub struct CgOptions {
    /// Relative residual target `‖b - Ax‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Spanning vectors of a known kernel; iterates are kept orthogonal to it.
    pub kernel: Vec<Vec<f64>>,
    /// Jacobi scaling.
    pub precondition: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-10,
            max_iter: 20_000,
            kernel: Vec::new(),
            precondition: true,
        }
    }
}

impl CgOptions {
    pub fn with_tol(tol: f64) -> Self {
        CgOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Modified Gram–Schmidt; drops numerically dependent vectors.
pub(crate) fn orthonormalize(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut u = v.clone();
        for q in &out {
            let c = dot(&u, q);
            u.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let n = norm(&u);
        if n > 1e-12 * norm(v).max(f64::MIN_POSITIVE) {
            u.iter_mut().for_each(|a| *a /= n);
            out.push(u);
        }
    }
    out
}

fn project_out(x: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(x, q);
        x.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
    }
}

/// Preconditioned conjugate gradients for symmetric positive (semi)definite `A`.
pub fn solve_spd(a: &SparseOperator, b: &[f64], opts: &CgOptions) -> Result<CgSolution, SolverError> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(SolverError::DimensionMismatch {
            expected: a.nrows(),
            got: n,
        });
    }
    let kernel = orthonormalize(&opts.kernel);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    if !kernel.is_empty() {
        let before = norm(&r);
        project_out(&mut r, &kernel);
        let component = ((before * before - dot(&r, &r)).max(0.0)).sqrt() / bnorm;
        if component > 1e-8 {
            return Err(SolverError::NotOrthogonalToKernel { component });
        }
    }
    let inv_diag: Vec<f64> = if opts.precondition {
        a.diag()
            .iter()
            .map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 })
            .collect()
    } else {
        vec![1.0; n]
    };
    let precond = |r: &[f64]| -> Vec<f64> {
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        project_out(&mut z, &kernel);
        z
    };

    let mut x = vec![0.0; n];
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut best_at = 0usize;
    let stall_window = 1000.max(opts.max_iter / 10);

    for it in 1..=opts.max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SolverError::Stalled {
                iterations: it,
                residual: norm(&r) / bnorm,
            });
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        let rel = norm(&r) / bnorm;
        if rel <= opts.tol {
            project_out(&mut x, &kernel);
            return Ok(CgSolution {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
        if rel < 0.99 * best {
            best = rel;
            best_at = it;
        } else if it - best_at > stall_window {
            return Err(SolverError::Stalled {
                iterations: it,
                residual: rel,
            });
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(SolverError::NotConverged {
        iterations: opts.max_iter,
        residual: norm(&r) / bnorm,
    })
}

#[derive(Debug, Clone)]
pub struct LeastSquaresOptions {
    pub tol: f64,
    /// Null directions the caller expects; more than this is an error.
    pub declared_nullity: usize,
}

impl Default for LeastSquaresOptions {
    fn default() -> Self {
        LeastSquaresOptions {
            tol: 1e-10,
            declared_nullity: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LeastSquaresSolution {
    /// Minimum-norm minimiser of `‖Ax - b‖₂`.
    pub x: Vec<f64>,
    /// `‖Ax - b‖₂`.
    pub residual: f64,
    pub nullity: usize,
}

/// Least squares through the normal equations `AᵀA x = Aᵀb`.
///
/// Eigenvalues of `AᵀA` below `(rank_tol)²·λ_max`, with `rank_tol = 1e-7`,
/// count as null; the solve then uses the pseudo-inverse on the complement.
pub fn solve_least_squares(
    a: &SparseOperator,
    b: &[f64],
    opts: &LeastSquaresOptions,
) -> Result<LeastSquaresSolution, SolverError> {
    if a.nrows() != b.len() {
        return Err(SolverError::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let ncols = a.ncols();
    if ncols > 400 {
        return least_squares_cgnr(a, b, opts);
    }
    let mut normal = DMatrix::<f64>::zeros(ncols, ncols);
    for i in 0..a.nrows() {
        let row: Vec<(usize, f64)> = a.row(i).collect();
        for &(j, vj) in &row {
            for &(k, vk) in &row {
                normal[(j, k)] += vj * vk;
            }
        }
    }
    let atb = DVector::from_vec(a.matvec_transpose(b));
    let eig = SymmetricEigen::new(normal);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rank_tol = 1e-7;
    let cutoff = rank_tol * rank_tol * lmax;
    let nullity = eig.eigenvalues.iter().filter(|l| **l <= cutoff).count();
    if nullity > opts.declared_nullity {
        return Err(SolverError::RankDeficient { nullity });
    }
    let mut x = DVector::<f64>::zeros(ncols);
    for (k, l) in eig.eigenvalues.iter().enumerate() {
        if *l > cutoff {
            let v = eig.eigenvectors.column(k);
            x += v * (v.dot(&atb) / l);
        }
    }
    let x: Vec<f64> = x.iter().copied().collect();
    let ax = a.matvec(&x);
    let residual = norm(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>());
    Ok(LeastSquaresSolution {
        x,
        residual,
        nullity,
    })
}

fn least_squares_cgnr(
    a: &SparseOperator,
    b: &[f64],
    opts: &LeastSquaresOptions,
) -> Result<LeastSquaresSolution, SolverError> {
    let at = a.transpose();
    let ncols = a.ncols();
    let atb = at.matvec(b);
    let col_norms: Vec<f64> = {
        let mut c = vec![0.0; ncols];
        for i in 0..a.nrows() {
            for (j, v) in a.row(i) {
                c[j] += v * v;
            }
        }
        c
    };
    let trace: f64 = col_norms.iter().sum();
    let reg = 1e-14 * trace / ncols as f64;
    let mut x = vec![0.0; ncols];
    let mut r = atb.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let bn = norm(&atb).max(f64::MIN_POSITIVE);
    let mut converged = false;
    for _ in 0..20 * ncols {
        let ap = at.matvec(&a.matvec(&p));
        let pap = dot(&p, &ap) + reg * dot(&p, &p);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for k in 0..ncols {
            x[k] += alpha * p[k];
            r[k] -= alpha * (ap[k] + reg * p[k]);
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() / bn <= opts.tol {
            converged = true;
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..ncols {
            p[k] = r[k] + beta * p[k];
        }
    }
    if !converged {
        return Err(SolverError::NotConverged {
            iterations: 20 * ncols,
            residual: dot(&r, &r).sqrt() / bn,
        });
    }
    let ax = a.matvec(&x);
    let residual = norm(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>());
    Ok(LeastSquaresSolution {
        x,
        residual,
        nullity: 0,
    })
}
