//! Inverted dropout: zero with probability p in train mode, survivors
//! scaled by 1/(1-p); exact identity in eval mode.

use crate::classifier::Mode;
use crate::numerics::RngStream;

pub fn draw_dropout_mask(len: usize, p: f64, stream: &mut RngStream) -> Vec<bool> {
    (0..len).map(|_| stream.uniform() >= p).collect()
}

pub fn apply_dropout_mask(x: &[f64], mask: &[bool], p: f64) -> Vec<f64> {
    let keep_scale = 1.0 / (1.0 - p);
    x.iter()
        .zip(mask)
        .map(|(v, &keep)| if keep { v * keep_scale } else { 0.0 })
        .collect()
}

pub fn dropout(x: &[f64], p: f64, stream: &mut RngStream, mode: Mode) -> Vec<f64> {
    assert!((0.0..1.0).contains(&p), "dropout p must be in [0, 1)");
    if mode == Mode::Eval || p == 0.0 {
        return x.to_vec();
    }
    let mask = draw_dropout_mask(x.len(), p, stream);
    apply_dropout_mask(x, &mask, p)
}
