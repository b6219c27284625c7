//! Low-rank adaptation: base weights stay frozen, training moves only the
//! rank-r factors. With the up-matrix zero-initialized, a freshly attached
//! adapter is an exact no-op.

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::numerics::{rng_derive, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterTarget {
    InProjection,
    OutProjection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraAdapter {
    pub target: AdapterTarget,
    pub rank: usize,
    pub alpha: f64,
    pub dropout: f64,
    /// Down projection, rank x in.
    pub a_down: DenseMatrix,
    /// Up projection, out x rank. Starts at zero.
    pub b_up: DenseMatrix,
}

impl LoraAdapter {
    pub fn scale(&self) -> f64 {
        self.alpha / self.rank as f64
    }
}

/// Adapters for one encoder layer (in- and out-projection).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerAdapters {
    pub w_in: LoraAdapter,
    pub w_out: LoraAdapter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraStack {
    pub layers: Vec<LayerAdapters>,
}

/// W_eff = W_base + (alpha / r) * B_up * A_down.
pub fn lora_effective(w_base: &DenseMatrix, adapter: &LoraAdapter) -> Result<DenseMatrix> {
    if adapter.b_up.rows() != w_base.rows()
        || adapter.a_down.cols() != w_base.cols()
        || adapter.b_up.cols() != adapter.a_down.rows()
    {
        return Err(Error::Shape(format!(
            "adapter ({}x{})*({}x{}) incompatible with base {}x{}",
            adapter.b_up.rows(),
            adapter.b_up.cols(),
            adapter.a_down.rows(),
            adapter.a_down.cols(),
            w_base.rows(),
            w_base.cols()
        )));
    }
    let delta = adapter.b_up.matmul(&adapter.a_down)?;
    let scale = adapter.scale();
    let mut out = w_base.clone();
    for r in 0..out.rows() {
        for c in 0..out.cols() {
            out.set(r, c, out.get(r, c) + scale * delta.get(r, c));
        }
    }
    Ok(out)
}

fn fresh_adapter(
    target: AdapterTarget,
    out_dim: usize,
    in_dim: usize,
    rank: usize,
    alpha: f64,
    dropout: f64,
    rng: &mut crate::numerics::RngStream,
) -> LoraAdapter {
    let std = 1.0 / (in_dim as f64).sqrt();
    let mut a_down = DenseMatrix::zeros(rank, in_dim);
    for r in 0..rank {
        for c in 0..in_dim {
            a_down.set(r, c, rng.normal() * std);
        }
    }
    LoraAdapter {
        target,
        rank,
        alpha,
        dropout,
        a_down,
        b_up: DenseMatrix::zeros(out_dim, rank),
    }
}

/// Attach fresh adapters to every layer's in- and out-projection.
pub fn init_adapters(
    config: &EncoderConfig,
    rank: usize,
    alpha: f64,
    dropout: f64,
    seed: u64,
) -> LoraStack {
    let mut rng = rng_derive(seed, "init/lora");
    let d_model = config.d_model;
    let d_inner = config.d_inner();
    let layers = (0..config.n_layers)
        .map(|_| LayerAdapters {
            w_in: fresh_adapter(
                AdapterTarget::InProjection,
                d_inner,
                d_model,
                rank,
                alpha,
                dropout,
                &mut rng,
            ),
            w_out: fresh_adapter(
                AdapterTarget::OutProjection,
                d_model,
                d_inner,
                rank,
                alpha,
                dropout,
                &mut rng,
            ),
        })
        .collect();
    LoraStack { layers }
}
