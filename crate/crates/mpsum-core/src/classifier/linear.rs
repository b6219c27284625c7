//! The relevance scorer: y = w . H + b.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearHead {
    pub fn zeros(n: usize) -> Self {
        Self {
            w: vec![0.0; n],
            b: 0.0,
        }
    }
}

pub fn linear_forward(h: &[f64], head: &LinearHead) -> Result<f64> {
    if h.len() != head.w.len() {
        return Err(Error::Shape(format!(
            "input of length {} vs weights of length {}",
            h.len(),
            head.w.len()
        )));
    }
    Ok(head.w.iter().zip(h).map(|(w, x)| w * x).sum::<f64>() + head.b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sigmoid;

    #[test]
    fn hand_computed_logit() {
        let head = LinearHead {
            w: vec![1.0, -1.0],
            b: 0.5,
        };
        assert_eq!(linear_forward(&[2.0, 1.0], &head).unwrap(), 1.5);
    }

    #[test]
    fn zero_weights_give_even_odds() {
        let head = LinearHead::zeros(3);
        let y = linear_forward(&[1.0, 2.0, 3.0], &head).unwrap();
        assert_eq!(y, 0.0);
        assert_eq!(sigmoid(y), 0.5);
    }

    #[test]
    fn zero_input_returns_bias() {
        let head = LinearHead {
            w: vec![4.0, 5.0],
            b: -0.75,
        };
        assert_eq!(linear_forward(&[0.0, 0.0], &head).unwrap(), -0.75);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let head = LinearHead::zeros(2);
        assert!(matches!(
            linear_forward(&[1.0], &head),
            Err(Error::Shape(_))
        ));
    }
}
