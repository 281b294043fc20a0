//! Dense symmetric linear algebra: Cholesky, cyclic Jacobi eigensolves, the
//! generalized symmetric eigenproblem via Cholesky reduction, and a power
//! iteration used as an independent cross-check.

use crate::dense::DenseMatrix;
use crate::error::Error;

/// Off-diagonal convergence tolerance for the Jacobi sweeps, relative to the
/// Frobenius norm of the input.
pub const JACOBI_TOL: f64 = 1e-12;
/// Upper bound on Jacobi sweeps; convergence is quadratic, so hitting this
/// means something is badly wrong with the input.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix, Error> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::CholeskyFailure { row: i });
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solve L x = b with L lower triangular.
pub fn solve_lower(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l.get(i, k) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Solve L^T x = b with L lower triangular.
pub fn solve_lower_transpose(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a symmetric matrix by
/// cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix), Error> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    let off = |m: &DenseMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..i {
                s += m.get(i, j) * m.get(i, j);
            }
        }
        (2.0 * s).sqrt()
    };

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&m) <= JACOBI_TOL * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                // Smaller-angle root of t^2 + 2 theta t - 1 = 0.
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if !converged && off(&m) > JACOBI_TOL * scale {
        return Err(Error::EigenNonConvergence {
            off_diagonal: off(&m),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, col, v.get(row, src));
        }
    }
    Ok((values, vectors))
}

/// Result of a generalized symmetric eigensolve A x = lambda M x.
pub struct GeneralizedEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Eigenvectors of the pencil, columns aligned with `values`.
    pub vectors: DenseMatrix,
}

/// Solve A x = lambda M x with A symmetric and M symmetric positive definite,
/// by the Cholesky reduction M = L L^T followed by Jacobi sweeps on
/// L^-1 A L^-T. Eigenvectors are mapped back through L^-T.
pub fn generalized_eigen(a: &DenseMatrix, m: &DenseMatrix) -> Result<GeneralizedEigen, Error> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(m.rows, m.cols);
    assert_eq!(a.rows, m.rows);
    let n = a.rows;
    let l = cholesky(m)?;
    // B = L^-1 A L^-T, column by column.
    let mut b = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| a.get(i, j)).collect();
        let w = solve_lower(&l, &col);
        for i in 0..n {
            b.set(i, j, w[i]);
        }
    }
    let mut bt = b.transpose();
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| bt.get(i, j)).collect();
        let w = solve_lower(&l, &col);
        for i in 0..n {
            bt.set(i, j, w[i]);
        }
    }
    // bt is now L^-1 (L^-1 A)^T = L^-1 A L^-T up to roundoff; symmetrize.
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (bt.get(i, j) + bt.get(j, i));
            bt.set(i, j, s);
            bt.set(j, i, s);
        }
    }
    let (values, y) = jacobi_eigen(&bt)?;
    let mut vectors = DenseMatrix::zeros(n, n);
    for col in 0..n {
        let yc: Vec<f64> = (0..n).map(|i| y.get(i, col)).collect();
        let x = solve_lower_transpose(&l, &yc);
        for i in 0..n {
            vectors.set(i, col, x[i]);
        }
    }
    Ok(GeneralizedEigen { values, vectors })
}

/// Relative residual ||A x - lambda M x|| / ||A x|| of a generalized eigenpair.
pub fn generalized_residual(a: &DenseMatrix, m: &DenseMatrix, lambda: f64, x: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let mx = m.matvec(x);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..x.len() {
        let r = ax[i] - lambda * mx[i];
        num += r * r;
        den += ax[i] * ax[i];
    }
    if den == 0.0 {
        return num.sqrt();
    }
    (num / den).sqrt()
}

/// Largest eigenvalue of a symmetric matrix by plain power iteration with
/// Rayleigh quotients. Independent of the Jacobi path; used to cross-check it.
/// Stops when the Rayleigh quotient stagnates to `tol` (relative) or after
/// `max_iter` steps, whichever comes first, and returns the last quotient.
pub fn power_iteration_largest(b: &DenseMatrix, tol: f64, max_iter: usize) -> f64 {
    assert_eq!(b.rows, b.cols);
    let n = b.rows;
    // Fixed, fully deterministic start vector with components in every
    // direction; a pseudo-random pattern avoids accidental orthogonality.
    let mut v: Vec<f64> = (0..n)
        .map(|i| (0.37 + 0.61 * i as f64).sin() + 0.5)
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= norm;
    }
    // The matrix may be indefinite; shift by a Gershgorin bound so the target
    // eigenvalue of b + shift I is the dominant one in modulus.
    let mut shift = 0.0_f64;
    for i in 0..n {
        let mut radius = 0.0;
        for j in 0..n {
            if j != i {
                radius += b.get(i, j).abs();
            }
        }
        shift = shift.max(radius - b.get(i, i));
    }
    shift = shift.max(0.0);
    let mut rayleigh = f64::NEG_INFINITY;
    for _ in 0..max_iter {
        let mut w = b.matvec(&v);
        for i in 0..n {
            w[i] += shift * v[i];
        }
        let new_rayleigh = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - shift;
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for i in 0..n {
            v[i] = w[i] / norm;
        }
        if (new_rayleigh - rayleigh).abs() <= tol * new_rayleigh.abs().max(1e-300) {
            return new_rayleigh;
        }
        rayleigh = new_rayleigh;
    }
    rayleigh
}

/// Orthonormal basis of the complement of the all-ones direction, as the last
/// n-1 columns of the Householder reflection mapping e_1 to 1/sqrt(n).
/// Used to restrict a pencil whose matrices share the constants kernel.
pub fn ones_complement_basis(n: usize) -> DenseMatrix {
    assert!(n >= 2);
    let mut u = vec![1.0 / (n as f64).sqrt(); n];
    u[0] -= 1.0;
    let unorm2: f64 = u.iter().map(|x| x * x).sum();
    let mut q = DenseMatrix::zeros(n, n - 1);
    for col in 0..n - 1 {
        let j = col + 1;
        // Column j of H = I - 2 u u^T / (u^T u).
        for i in 0..n {
            let mut v = if i == j { 1.0 } else { 0.0 };
            v -= 2.0 * u[i] * u[j] / unorm2;
            q.set(i, col, v);
        }
    }
    q
}
