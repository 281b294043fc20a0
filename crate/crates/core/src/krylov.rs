//! Preconditioned conjugate gradients with a Lanczos condition number
//! estimate recovered from the CG coefficients. Plain PCG, no
//! reorthogonalization: the estimate is a byproduct, not a refinement loop.

use crate::dense::DenseMatrix;
use crate::error::Error;
use crate::linalg::jacobi_eigen;

/// Anything that acts like a symmetric operator on vectors.
pub trait SymOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

/// The identity, as a preconditioner placeholder.
pub struct IdentityOp(pub usize);

impl SymOp for IdentityOp {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

/// Diagonal operator, e.g. a Jacobi preconditioner built from inverse
/// diagonal entries.
pub struct DiagonalOp(pub Vec<f64>);

impl SymOp for DiagonalOp {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.0).map(|(a, d)| a * d).collect()
    }
}

impl SymOp for crate::sparse::SymSparseMatrix {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
}

impl SymOp for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
}

/// Outcome of a PCG solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final preconditioned residual norm relative to the initial one.
    pub relative_residual: f64,
    /// sqrt(<r, C r>) after each iteration, starting with iteration zero.
    pub residual_history: Vec<f64>,
    /// Extreme Ritz values of the Lanczos tridiagonal built from the CG
    /// coefficients; empty until at least one iteration ran.
    pub ritz_min: f64,
    pub ritz_max: f64,
    /// Condition number estimate ritz_max / ritz_min of the preconditioned
    /// operator; NaN when no iterations ran.
    pub kappa_est: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Extreme eigenvalues of the symmetric tridiagonal assembled from the PCG
/// alpha and beta coefficients.
fn lanczos_extremes(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let k = alphas.len();
    let mut t = DenseMatrix::zeros(k, k);
    for i in 0..k {
        let mut d = 1.0 / alphas[i];
        if i > 0 {
            d += betas[i - 1] / alphas[i - 1];
        }
        t.set(i, i, d);
        if i + 1 < k {
            let off = betas[i].sqrt() / alphas[i];
            t.set(i, i + 1, off);
            t.set(i + 1, i, off);
        }
    }
    let (vals, _) = jacobi_eigen(&t).expect("tridiagonal Jacobi cannot stall");
    (vals[0], vals[k - 1])
}

/// Solve A x = b by preconditioned conjugate gradients, stopping when the
/// preconditioned residual norm has dropped by `tol` relative to the start.
/// `a` and `c` must both be symmetric positive definite; a nonpositive
/// <r, C r> reports a breakdown. Hitting `max_iter` returns the iterate
/// inside the error so callers can inspect it.
pub fn pcg(
    a: &dyn SymOp,
    c: &dyn SymOp,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport), Error> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if c.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c.dim(),
        });
    }

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = c.apply(&r);
    let mut rz = dot(&r, &z);
    if rz < 0.0 {
        return Err(Error::Breakdown {
            iteration: 0,
            value: rz,
        });
    }
    let norm0 = rz.sqrt();
    let mut history = vec![norm0];
    let mut alphas = Vec::new();
    let mut betas = Vec::new();

    let finish = |iterations: usize,
                  history: Vec<f64>,
                  alphas: &[f64],
                  betas: &[f64]| {
        let (ritz_min, ritz_max) = if alphas.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            lanczos_extremes(alphas, betas)
        };
        SolveReport {
            iterations,
            relative_residual: if norm0 == 0.0 {
                0.0
            } else {
                history.last().unwrap() / norm0
            },
            residual_history: history,
            ritz_min,
            ritz_max,
            kappa_est: ritz_max / ritz_min,
        }
    };

    if norm0 == 0.0 {
        return Ok((x, finish(0, history, &alphas, &betas)));
    }

    let mut p = z.clone();
    for iter in 0..max_iter {
        let ap = a.apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Breakdown {
                iteration: iter,
                value: pap,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = c.apply(&r);
        let rz_new = dot(&r, &z);
        if rz_new < 0.0 {
            return Err(Error::Breakdown {
                iteration: iter + 1,
                value: rz_new,
            });
        }
        let beta = rz_new / rz;
        alphas.push(alpha);
        betas.push(beta);
        history.push(rz_new.sqrt());
        rz = rz_new;
        if rz.sqrt() <= tol * norm0 {
            // The trailing beta belongs to the next, never-built direction.
            betas.pop();
            return Ok((x, finish(iter + 1, history, &alphas, &betas)));
        }
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    betas.pop();
    let report = finish(max_iter, history, &alphas, &betas);
    Err(Error::MaxIterReached {
        solution: x,
        report,
    })
}
