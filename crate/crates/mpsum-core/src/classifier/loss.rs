//! Binary cross-entropy on logits in the log-sum-exp form.

use crate::error::{Error, Result};
use crate::numerics::sigmoid;

/// Returns (mean loss, gradient w.r.t. each logit). The gradient already
/// carries the 1/batch factor: (sigmoid(z) - y) / n.
pub fn bce_loss(logits: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} logits vs {} labels",
            logits.len(),
            labels.len()
        )));
    }
    for &y in labels {
        if y != 0.0 && y != 1.0 {
            return Err(Error::InvalidLabel(y));
        }
    }
    let n = logits.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(labels) {
        // max(z, 0) - z y + ln(1 + e^{-|z|})
        total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        grad.push((sigmoid(z) - y) / n);
    }
    Ok((total / n, grad))
}
