//! Jacobi-preconditioned conjugate gradients.

use rayon::prelude::*;

use crate::assembly::Execution;
use crate::error::{invalid, Error, Result};
use crate::sparse::SparseMatrixCsr;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    /// Bound on `sqrt(r^T D^-1 r)` with `D = diag(A)`.
    pub tol: f64,
    pub max_iter: usize,
    pub execution: Execution,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            execution: Execution::Sequential,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub criterion: f64,
}

fn dot(a: &[f64], b: &[f64], execution: Execution) -> f64 {
    match execution {
        Execution::Sequential => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        Execution::Parallel => a.par_iter().zip(b).map(|(x, y)| x * y).sum(),
    }
}

/// Solves `A x = b` for symmetric positive definite `A`, starting at `x0`
/// (zero if absent).
pub fn cg_jacobi(
    matrix: &SparseMatrixCsr,
    rhs: &[f64],
    options: &CgOptions,
    x0: Option<&[f64]>,
) -> Result<SolveReport> {
    let n = matrix.size();
    if rhs.len() != n || x0.is_some_and(|x| x.len() != n) {
        return invalid("right hand side or start vector has the wrong length");
    }
    let diagonal = matrix.diagonal();
    if let Some(i) = diagonal.iter().position(|&d| !(d > 0.0)) {
        return invalid(format!("diagonal entry {i} is not positive"));
    }
    let inverse: Vec<f64> = diagonal.iter().map(|d| 1.0 / d).collect();
    let matvec = |x: &[f64], y: &mut [f64]| match options.execution {
        Execution::Sequential => matrix.matvec(x, y),
        Execution::Parallel => matrix.matvec_parallel(x, y),
    };

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    matvec(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(&inverse).map(|(r, d)| r * d).collect();
    let mut rz = dot(&r, &z, options.execution);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut iterations = 0;

    loop {
        let criterion = rz.max(0.0).sqrt();
        if criterion < options.tol {
            return Ok(SolveReport {
                solution: x,
                iterations,
                criterion,
            });
        }
        if iterations >= options.max_iter {
            return Err(Error::NotConverged(Box::new(SolveReport {
                solution: x,
                iterations,
                criterion,
            })));
        }
        matvec(&p, &mut q);
        let alpha = rz / dot(&p, &q, options.execution);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            z[i] = r[i] * inverse[i];
        }
        let rz_new = dot(&r, &z, options.execution);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }
}
