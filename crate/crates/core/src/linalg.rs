//! Small linear-algebra kernels: preconditioned conjugate gradients and dense
//! symmetric eigendecomposition.

use faer::{Mat, Side};

use crate::error::{LabError, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Result of a converged [`pcg`] solve.
#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `‖b − Ax‖ / ‖b‖`.
    pub residual: f64,
}

/// Preconditioned conjugate gradients for a Euclidean-symmetric positive
/// (semi)definite `a`. Fails on loss of positivity or when `max_iter` is hit.
pub fn pcg(
    a: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    precond: impl Fn(&[f64]) -> Vec<f64>,
    x0: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; b.len()],
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut x = x0.unwrap_or_else(|| vec![0.0; b.len()]);
    let ax = a(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                residual: res,
            });
        }
        let ap = a(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(LabError::SolverNonConvergence {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        res = dot(&r, &r).sqrt() / bnorm;
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    if res <= tol {
        return Ok(CgOutcome {
            x,
            iterations: max_iter,
            residual: res,
        });
    }
    Err(LabError::SolverNonConvergence {
        iterations: max_iter,
        residual: res,
    })
}

/// Eigenpairs of a dense symmetric matrix (row-major, `n × n`), ascending.
/// Returns eigenvalues and column-major eigenvectors.
pub fn symmetric_eigen(n: usize, matrix: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = Mat::<f64>::from_fn(n, n, |i, j| matrix[i * n + j]);
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| LabError::EigenNonConvergence {
            iterations: 0,
            residual: f64::NAN,
        })?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = order.iter().map(|&k| s[k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        for i in 0..n {
            vectors.push(u[(i, k)]);
        }
    }
    Ok((values, vectors))
}
