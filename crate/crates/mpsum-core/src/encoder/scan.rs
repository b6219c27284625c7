//! Zero-order-hold discretization and the linear-recurrence scan, in both
//! exact sequential form and Blelloch-style parallel form.

use crate::error::{Error, Result};

pub const DELTA_TAYLOR_THRESHOLD: f64 = 1e-4;

/// Discretize one (delta, a, b) triple:
///   a_bar = exp(delta a)
///   b_bar = ((exp(delta a) - 1) / a) b
/// with a Taylor form below |delta a| = threshold to avoid the 0/0.
pub fn discretize(delta: f64, a: f64, b_in: f64) -> Result<(f64, f64)> {
    discretize_with_threshold(delta, a, b_in, DELTA_TAYLOR_THRESHOLD)
}

pub fn discretize_with_threshold(
    delta: f64,
    a: f64,
    b_in: f64,
    threshold: f64,
) -> Result<(f64, f64)> {
    if a >= 0.0 {
        return Err(Error::UnstableA(a));
    }
    Ok(zoh(delta, a, b_in, threshold))
}

/// The discretization kernel with preconditions already checked.
#[inline]
pub(crate) fn zoh(delta: f64, a: f64, b_in: f64, threshold: f64) -> (f64, f64) {
    let (a_bar, b_bar, _, _, _) = zoh_with_grads(delta, a, b_in, threshold);
    (a_bar, b_bar)
}

/// Partial derivatives of `discretize` used by the backward pass:
/// (da_bar/ddelta, db_bar/ddelta, db_bar/db_in), matching the branch the
/// forward pass takes.
pub fn discretize_grads(delta: f64, a: f64, b_in: f64, threshold: f64) -> (f64, f64, f64) {
    let (_, _, da_dd, db_dd, db_db) = zoh_with_grads(delta, a, b_in, threshold);
    (da_dd, db_dd, db_db)
}

/// Forward values and partials in one evaluation:
/// (a_bar, b_bar, da_bar/ddelta, db_bar/ddelta, db_bar/db_in).
#[inline]
pub(crate) fn zoh_with_grads(
    delta: f64,
    a: f64,
    b_in: f64,
    threshold: f64,
) -> (f64, f64, f64, f64, f64) {
    let z = delta * a;
    let a_bar = z.exp();
    let da_ddelta = a * a_bar;
    if z.abs() < threshold {
        let poly = 1.0 + z / 2.0 + z * z / 6.0;
        let b_bar = delta * b_in * poly;
        let db_ddelta = b_in * (1.0 + z + z * z / 2.0);
        let db_db = delta * poly;
        (a_bar, b_bar, da_ddelta, db_ddelta, db_db)
    } else {
        let b_bar = ((a_bar - 1.0) / a) * b_in;
        let db_ddelta = a_bar * b_in;
        let db_db = (a_bar - 1.0) / a;
        (a_bar, b_bar, da_ddelta, db_ddelta, db_db)
    }
}

/// One step of the recurrence h' = a h + b as an element of the scan monoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPair {
    pub a: f64,
    pub b: f64,
}

pub const SCAN_IDENTITY: ScanPair = ScanPair { a: 1.0, b: 0.0 };

/// Associative composition: apply `first`, then `second`.
#[inline]
pub fn scan_combine(first: ScanPair, second: ScanPair) -> ScanPair {
    ScanPair {
        a: first.a * second.a,
        b: second.a * first.b + second.b,
    }
}

fn check_shapes(a_bars: &[f64], drives: &[f64], c_steps: &[f64], n_state: usize) -> Result<usize> {
    if n_state == 0 {
        return Err(Error::Shape("n_state must be positive".into()));
    }
    if a_bars.len() != drives.len() || a_bars.len() != c_steps.len() {
        return Err(Error::Shape(format!(
            "scan inputs disagree: {} vs {} vs {}",
            a_bars.len(),
            drives.len(),
            c_steps.len()
        )));
    }
    if a_bars.len() % n_state != 0 {
        return Err(Error::Shape(format!(
            "scan input length {} is not a multiple of n_state {}",
            a_bars.len(),
            n_state
        )));
    }
    Ok(a_bars.len() / n_state)
}

/// Exact sequential evaluation of h_t = a_t h_{t-1} + b_t (h_0 = 0) with
/// per-step readout y_t = sum_n c_t[n] h_t[n]. Inputs are step-major
/// (T x n_state, flattened).
pub fn selective_scan_seq(
    a_bars: &[f64],
    drives: &[f64],
    c_steps: &[f64],
    n_state: usize,
) -> Result<Vec<f64>> {
    let steps = check_shapes(a_bars, drives, c_steps, n_state)?;
    let mut h = vec![0.0f64; n_state];
    let mut y = Vec::with_capacity(steps);
    for t in 0..steps {
        let base = t * n_state;
        let mut out = 0.0;
        for n in 0..n_state {
            h[n] = a_bars[base + n] * h[n] + drives[base + n];
            out += c_steps[base + n] * h[n];
        }
        y.push(out);
    }
    Ok(y)
}

/// Same contract as the sequential scan, evaluated with a Blelloch
/// up-sweep/down-sweep over the associative pair composition.
pub fn selective_scan_parallel(
    a_bars: &[f64],
    drives: &[f64],
    c_steps: &[f64],
    n_state: usize,
) -> Result<Vec<f64>> {
    let steps = check_shapes(a_bars, drives, c_steps, n_state)?;
    let mut y = vec![0.0f64; steps];
    let mut pairs = Vec::new();
    for n in 0..n_state {
        pairs.clear();
        pairs.extend((0..steps).map(|t| ScanPair {
            a: a_bars[t * n_state + n],
            b: drives[t * n_state + n],
        }));
        let prefixes = blelloch_inclusive(&pairs);
        for t in 0..steps {
            // h_0 = 0, so h_t is just the accumulated b term.
            y[t] += c_steps[t * n_state + n] * prefixes[t].b;
        }
    }
    Ok(y)
}

/// Inclusive prefix composition via the classic two-phase Blelloch scan,
/// padded to a power of two with identity elements.
fn blelloch_inclusive(items: &[ScanPair]) -> Vec<ScanPair> {
    let n = items.len();
    if n == 0 {
        return Vec::new();
    }
    let padded = n.next_power_of_two();
    let mut tree = vec![SCAN_IDENTITY; padded];
    tree[..n].copy_from_slice(items);

    // Up-sweep: build subtree reductions.
    let mut stride = 1;
    while stride < padded {
        let step = stride * 2;
        let mut k = 0;
        while k < padded {
            let lo = k + stride - 1;
            let hi = k + step - 1;
            tree[hi] = scan_combine(tree[lo], tree[hi]);
            k += step;
        }
        stride = step;
    }

    // Down-sweep: distribute exclusive prefixes.
    tree[padded - 1] = SCAN_IDENTITY;
    let mut stride = padded / 2;
    while stride >= 1 {
        let step = stride * 2;
        let mut k = 0;
        while k < padded {
            let lo = k + stride - 1;
            let hi = k + step - 1;
            let left_sum = tree[lo];
            let prefix = tree[hi];
            tree[lo] = prefix;
            tree[hi] = scan_combine(prefix, left_sum);
            k += step;
        }
        stride /= 2;
    }

    // Inclusive value = exclusive prefix composed with the element itself.
    (0..n).map(|i| scan_combine(tree[i], items[i])).collect()
}
