//! Poincare-ball geometry: the hyperbolic distance and the scaler that
//! maps raw embeddings into the open unit ball.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::arcosh;

/// Hard cap on the norm of any projected point. Fitting targets 0.9 so
/// fine-tuning can move embeddings without instantly hitting the clamp.
pub const MAX_RADIUS: f64 = 0.99;
const FIT_RADIUS: f64 = 0.9;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// d(a, b) = arcosh(1 + 2 |a-b|^2 / ((1 - |a|^2)(1 - |b|^2)))
pub fn poincare_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "poincare distance between lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na2: f64 = a.iter().map(|x| x * x).sum();
    let nb2: f64 = b.iter().map(|x| x * x).sum();
    if na2 >= 1.0 {
        return Err(Error::OutOfBall(na2.sqrt()));
    }
    if nb2 >= 1.0 {
        return Err(Error::OutOfBall(nb2.sqrt()));
    }
    let diff2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let arg = 1.0 + 2.0 * diff2 / ((1.0 - na2) * (1.0 - nb2));
    arcosh(arg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallScaler {
    pub scale: f64,
}

impl BallScaler {
    /// Scale a vector into the ball, hard-clamping the norm at 0.99.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = v.iter().map(|x| x * self.scale).collect();
        let n = norm(&scaled);
        if n > MAX_RADIUS {
            let shrink = MAX_RADIUS / n;
            scaled.iter().map(|x| x * shrink).collect()
        } else {
            scaled
        }
    }

    /// Whether `project` would hit the clamp for this input.
    pub fn clamps(&self, v: &[f64]) -> bool {
        norm(v) * self.scale > MAX_RADIUS
    }
}

/// scale = 0.9 / max_i |e_i|, leaving headroom below the 0.99 clamp.
pub fn fit_ball_scaler(embeddings: &[Vec<f64>]) -> Result<BallScaler> {
    let max_norm = embeddings.iter().map(|e| norm(e)).fold(0.0f64, f64::max);
    if embeddings.is_empty() || max_norm == 0.0 {
        return Err(Error::DegenerateInput(
            "ball scaler needs at least one nonzero embedding".into(),
        ));
    }
    Ok(BallScaler {
        scale: FIT_RADIUS / max_norm,
    })
}
