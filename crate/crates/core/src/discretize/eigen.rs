//! Smallest eigenpairs of symmetric sparse operators.
//!
//! Below [`DENSE_LIMIT`] unknowns the operator is densified and handed to a
//! symmetric eigensolver. Larger problems run single-vector Lanczos with full
//! reorthogonalisation on the shift-inverted operator `(A + σI)⁻¹`, locking one
//! converged Ritz pair per restart so that repeated eigenvalues are recovered.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};

use super::solvers::{solve_spd, CgOptions};
use super::sparse::SparseOperator;
use super::SolverError;

pub const DENSE_LIMIT: usize = 2000;

/// Residual bound `‖Av - λv‖` for an accepted pair (`‖v‖ = 1`).
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual(a: &SparseOperator, value: f64, v: &[f64]) -> f64 {
    a.matvec(v)
        .iter()
        .zip(v)
        .map(|(av, vi)| (av - value * vi).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// The `m` smallest eigenpairs of symmetric `a`, ascending.
pub fn eigen_smallest(a: &SparseOperator, m: usize) -> Result<Vec<EigenPair>, SolverError> {
    if !a.is_symmetric() {
        return Err(SolverError::NotSymmetric {
            asymmetry: a.asymmetry(),
        });
    }
    let n = a.nrows();
    let m = m.min(n);
    if n < DENSE_LIMIT {
        dense_smallest(a, m)
    } else {
        lanczos_smallest(a, m, 0x5eed)
    }
}

fn dense_smallest(a: &SparseOperator, m: usize) -> Result<Vec<EigenPair>, SolverError> {
    let eig = SymmetricEigen::new(a.to_dense());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let pairs: Vec<EigenPair> = order
        .into_iter()
        .take(m)
        .map(|k| {
            let vector: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let value = eig.eigenvalues[k];
            EigenPair {
                residual: residual(a, value, &vector),
                value,
                vector,
            }
        })
        .collect();
    check(pairs)
}

fn check(pairs: Vec<EigenPair>) -> Result<Vec<EigenPair>, SolverError> {
    if pairs.iter().any(|p| !(p.residual <= EIGEN_RESIDUAL_TOL)) {
        return Err(SolverError::EigenNotConverged {
            residuals: pairs.iter().map(|p| p.residual).collect(),
        });
    }
    Ok(pairs)
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(w, q);
            w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
    }
}

/// Shift-invert Lanczos with locking. Public for testing on mid-size operators.
pub fn lanczos_smallest(
    a: &SparseOperator,
    m: usize,
    seed: u64,
) -> Result<Vec<EigenPair>, SolverError> {
    let n = a.nrows();
    let diag = a.diag();
    let scale = diag.iter().map(|d| d.abs()).sum::<f64>() / n as f64;
    let shift = 1e-2 * scale.max(f64::MIN_POSITIVE);
    let shifted = a.add_diagonal(&vec![shift; n]);
    let cg = CgOptions {
        tol: 1e-13,
        max_iter: 50 * n,
        ..Default::default()
    };
    let apply_inverse = |v: &[f64]| -> Result<Vec<f64>, SolverError> {
        Ok(solve_spd(&shifted, v, &cg)?.x)
    };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut locked: Vec<EigenPair> = Vec::new();
    let max_krylov = 80.min(n);
    let mut attempts = 0;

    while locked.len() < m {
        attempts += 1;
        if attempts > 4 * m + 4 {
            return Err(SolverError::EigenNotConverged {
                residuals: locked.iter().map(|p| p.residual).collect(),
            });
        }
        let locked_vecs: Vec<Vec<f64>> = locked.iter().map(|p| p.vector.clone()).collect();
        let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthogonalize(&mut q, &locked_vecs);
        let qn = dot(&q, &q).sqrt();
        q.iter_mut().for_each(|x| *x /= qn);

        let mut basis = vec![q];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut best: Option<(f64, Vec<f64>)> = None;

        for k in 0..max_krylov {
            let mut w = apply_inverse(&basis[k])?;
            let alpha = dot(&w, &basis[k]);
            orthogonalize(&mut w, &locked_vecs);
            orthogonalize(&mut w, &basis);
            let beta = dot(&w, &w).sqrt();
            alphas.push(alpha);

            let dim = alphas.len();
            let mut t = DMatrix::<f64>::zeros(dim, dim);
            for i in 0..dim {
                t[(i, i)] = alphas[i];
                if i + 1 < dim {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let top = (0..dim)
                .max_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]))
                .unwrap();
            let theta = eig.eigenvalues[top];
            let y = eig.eigenvectors.column(top);
            let estimate = (beta * y[dim - 1]).abs();
            let done = estimate <= 1e-12 * theta.abs() || beta <= 1e-14 || k + 1 == max_krylov;
            if done {
                let mut u = vec![0.0; n];
                for (c, qv) in y.iter().zip(&basis) {
                    u.iter_mut().zip(qv).for_each(|(a, b)| *a += c * b);
                }
                orthogonalize(&mut u, &locked_vecs);
                let un = dot(&u, &u).sqrt();
                u.iter_mut().for_each(|x| *x /= un);
                best = Some((theta, u));
                break;
            }
            betas.push(beta);
            basis.push(w.into_iter().map(|x| x / beta).collect());
        }

        let (_, u) = best.expect("Lanczos loop always produces a Ritz pair");
        let value = dot(&a.matvec(&u), &u);
        let res = residual(a, value, &u);
        if res <= EIGEN_RESIDUAL_TOL {
            locked.push(EigenPair {
                value,
                vector: u,
                residual: res,
            });
        }
    }
    locked.sort_by(|p, q| p.value.total_cmp(&q.value));
    Ok(locked)
}
