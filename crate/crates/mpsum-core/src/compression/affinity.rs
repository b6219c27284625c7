//! Dense RBF affinity with a median-distance bandwidth.

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// W_ij = exp(-|p_i - p_j|^2 / (2 sigma^2)) with sigma the median nonzero
/// pairwise distance (1 if every distance is zero); W_ii = 0.
pub fn rbf_affinity(points: &[Vec<f64>]) -> Result<DenseMatrix> {
    let n = points.len();
    if n < 2 {
        return Err(Error::DegenerateInput(
            "affinity needs at least 2 points".into(),
        ));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Shape("points have mixed dimensions".into()));
    }

    let mut dist = DenseMatrix::zeros(n, n);
    let mut nonzero = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let d = d2.sqrt();
            dist.set(i, j, d);
            dist.set(j, i, d);
            if d > 0.0 {
                nonzero.push(d);
            }
        }
    }

    let sigma = if nonzero.is_empty() {
        1.0
    } else {
        nonzero.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = nonzero.len();
        if m % 2 == 1 {
            nonzero[m / 2]
        } else {
            (nonzero[m / 2 - 1] + nonzero[m / 2]) / 2.0
        }
    };

    let mut w = DenseMatrix::zeros(n, n);
    let denom = 2.0 * sigma * sigma;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = dist.get(i, j);
                w.set(i, j, (-d * d / denom).exp());
            }
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coincident_points_have_unit_affinity() {
        let w = rbf_affinity(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![5.0, 5.0]]).unwrap();
        assert_eq!(w.get(0, 1), 1.0);
        assert_eq!(w.get(1, 0), 1.0);
    }

    #[test]
    fn symmetric_with_zero_diagonal() {
        let w = rbf_affinity(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        for i in 0..3 {
            assert_eq!(w.get(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(w.get(i, j), w.get(j, i));
            }
        }
    }

    #[test]
    fn two_points_at_distance_sigma() {
        // With two points, sigma is their distance, so W = exp(-1/2).
        let w = rbf_affinity(&[vec![0.0], vec![7.3]]).unwrap();
        assert!((w.get(0, 1) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn all_coincident_points_fall_back_to_unit_sigma() {
        let w = rbf_affinity(&[vec![2.0], vec![2.0]]).unwrap();
        assert_eq!(w.get(0, 1), 1.0);
    }

    #[test]
    fn single_point_rejected() {
        assert!(matches!(
            rbf_affinity(&[vec![1.0]]),
            Err(Error::DegenerateInput(_))
        ));
    }
}
