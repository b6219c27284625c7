//! Cyclic Jacobi eigensolver for real symmetric matrices.
//!
//! Adequate for the dense desk-scale Laplacians this crate produces
//! (n <= 512). Eigenvalues come back ascending with matching orthonormal
//! eigenvector columns.

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

const MAX_SWEEPS: usize = 100;
const OFF_DIAG_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, one per column, aligned with `eigenvalues`.
    pub eigenvectors: DenseMatrix,
}

impl EigenDecomposition {
    /// Column `j` of the eigenvector matrix.
    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        (0..self.eigenvectors.rows())
            .map(|i| self.eigenvectors.get(i, j))
            .collect()
    }
}

/// Diagonalize a symmetric matrix: M Q = Q diag(eigenvalues).
pub fn jacobi_eigh(m: &DenseMatrix) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(Error::InvalidMatrix(format!(
            "expected a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.all_finite() {
        return Err(Error::InvalidMatrix("matrix has non-finite entries".into()));
    }
    if m.max_asymmetry() > SYMMETRY_TOL {
        return Err(Error::InvalidMatrix(format!(
            "matrix is asymmetric by {:.3e}",
            m.max_asymmetry()
        )));
    }

    let n = m.rows();
    let mut a = m.clone();
    let mut q = DenseMatrix::identity(n);
    if n <= 1 {
        return Ok(EigenDecomposition {
            eigenvalues: (0..n).map(|i| a.get(i, i)).collect(),
            eigenvectors: q,
        });
    }

    let scale = m.frobenius_norm().max(1.0);
    let threshold = OFF_DIAG_TOL * scale;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut worst = 0.0f64;
        for p in 0..n - 1 {
            for r in p + 1..n {
                worst = worst.max(a.get(p, r).abs());
            }
        }
        if worst <= threshold {
            converged = true;
            break;
        }

        for p in 0..n - 1 {
            for r in p + 1..n {
                let apq = a.get(p, r);
                if apq.abs() <= threshold {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(r, r);
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                a.set(p, p, app - t * apq);
                a.set(r, r, aqq + t * apq);
                a.set(p, r, 0.0);
                a.set(r, p, 0.0);
                for i in 0..n {
                    if i == p || i == r {
                        continue;
                    }
                    let aip = a.get(i, p);
                    let aiq = a.get(i, r);
                    a.set(i, p, c * aip - s * aiq);
                    a.set(p, i, c * aip - s * aiq);
                    a.set(i, r, s * aip + c * aiq);
                    a.set(r, i, s * aip + c * aiq);
                }
                for i in 0..n {
                    let qip = q.get(i, p);
                    let qiq = q.get(i, r);
                    q.set(i, p, c * qip - s * qiq);
                    q.set(i, r, s * qip + c * qiq);
                }
            }
        }
    }
    if !converged {
        // One last check: the final sweep may have finished the job.
        let mut worst = 0.0f64;
        for p in 0..n - 1 {
            for r in p + 1..n {
                worst = worst.max(a.get(p, r).abs());
            }
        }
        if worst > threshold {
            return Err(Error::NoConvergence(MAX_SWEEPS));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, new_col, q.get(i, old_col));
        }
    }

    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    })
}
