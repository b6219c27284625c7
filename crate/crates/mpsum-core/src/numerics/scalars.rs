//! Numerically stable scalar functions.

use crate::error::{Error, Result};

/// log(1 + e^x) without overflow for |x| up to at least 700.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// arcosh(x) = ln(x + sqrt(x^2 - 1)), accurate near x = 1.
pub fn arcosh(x: f64) -> Result<f64> {
    if !(x >= 1.0) {
        return Err(Error::Domain(format!("arcosh requires x >= 1, got {x}")));
    }
    // Written in terms of u = x - 1 to avoid cancellation in x^2 - 1.
    let u = x - 1.0;
    Ok((u + (u * u + 2.0 * u).sqrt()).ln_1p())
}

/// artanh(x) for |x| < 1.
pub fn artanh(x: f64) -> Result<f64> {
    if !(x.abs() < 1.0) {
        return Err(Error::Domain(format!("artanh requires |x| < 1, got {x}")));
    }
    Ok(0.5 * (x.ln_1p() - (-x).ln_1p()))
}
