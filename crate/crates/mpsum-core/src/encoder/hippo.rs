//! Dense HiPPO-LegS matrix; its diagonal seeds the encoder's A parameter.

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Entry (n, k), 0-indexed:
///   -sqrt(2n+1) * sqrt(2k+1)  if n > k
///   -(n+1)                    if n = k
///   0                         if n < k
pub fn hippo_legs_matrix(n: usize) -> Result<DenseMatrix> {
    if n < 1 {
        return Err(Error::InvalidSize("hippo matrix needs N >= 1".into()));
    }
    let mut m = DenseMatrix::zeros(n, n);
    for row in 0..n {
        for col in 0..=row {
            let v = if row == col {
                -((row + 1) as f64)
            } else {
                -((2 * row + 1) as f64).sqrt() * ((2 * col + 1) as f64).sqrt()
            };
            m.set(row, col, v);
        }
    }
    Ok(m)
}
