//! Spectral embedding: rows of the k bottom eigenvectors of the normalized
//! graph Laplacian, row-normalized to unit length.

use crate::error::{Error, Result};
use crate::numerics::{jacobi_eigh, DenseMatrix};

const ISOLATED_DEGREE: f64 = 1e-12;

/// Embed each vertex of the affinity graph into R^k.
pub fn spectral_embed(affinity: &DenseMatrix, k: usize) -> Result<Vec<Vec<f64>>> {
    let n = affinity.rows();
    if !affinity.is_square() {
        return Err(Error::Shape(format!(
            "affinity must be square, got {}x{}",
            n,
            affinity.cols()
        )));
    }
    if k > n {
        return Err(Error::InvalidK { k, n });
    }
    if k < 2 {
        return Err(Error::InvalidK { k, n });
    }

    // Normalized Laplacian L = I - D^{-1/2} W D^{-1/2}; isolated vertices
    // get an epsilon degree so the scaling stays finite.
    let mut inv_sqrt_deg = vec![0.0; n];
    for i in 0..n {
        let mut deg: f64 = affinity.row(i).iter().sum();
        if deg <= 0.0 {
            deg = ISOLATED_DEGREE;
        }
        inv_sqrt_deg[i] = 1.0 / deg.sqrt();
    }
    let mut lap = DenseMatrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = -affinity.get(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
            lap.set(i, j, v);
            lap.set(j, i, v);
        }
    }

    let eig = jacobi_eigh(&lap)?;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<f64> = (0..k).map(|j| eig.eigenvectors.get(i, j)).collect();
        let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut row {
                *v /= norm;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
