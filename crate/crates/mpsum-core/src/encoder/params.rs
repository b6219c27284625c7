//! Encoder configuration and parameter initialization.

use serde::{Deserialize, Serialize};

use crate::encoder::hippo::hippo_legs_matrix;
use crate::error::Result;
use crate::numerics::{rng_derive, DenseMatrix, RngStream};

/// How the final token representations collapse into one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Mean over valid (stored, non-padded) positions.
    #[default]
    MeanValid,
    /// Final position only.
    LastPosition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    #[default]
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub expand: usize,
    pub d_state: usize,
    pub n_layers: usize,
    pub max_len: usize,
    pub delta_taylor_threshold: f64,
    pub pooling: Pooling,
    pub scan: ScanMode,
    /// Chunk length for hidden-state recomputation in the backward pass.
    pub backward_chunk: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            expand: 2,
            d_state: 16,
            n_layers: 2,
            max_len: 128,
            delta_taylor_threshold: 1e-4,
            pooling: Pooling::MeanValid,
            scan: ScanMode::Sequential,
            backward_chunk: 32,
        }
    }
}

impl EncoderConfig {
    pub fn d_inner(&self) -> usize {
        self.d_model * self.expand
    }
}

/// Weights of one encoder layer. Matrices are stored out-by-in, so a
/// projection applies as y = W x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub w_in: DenseMatrix,    // d_inner x d_model
    pub w_delta: DenseMatrix, // d_inner x d_inner
    pub b_delta: Vec<f64>,    // d_inner
    pub w_b: DenseMatrix,     // d_state x d_inner
    pub w_c: DenseMatrix,     // d_state x d_inner
    pub a: DenseMatrix,       // d_inner x d_state, strictly negative entries
    pub w_out: DenseMatrix,   // d_model x d_inner
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MambaParams {
    pub embedding: DenseMatrix, // |V| x d_model
    pub layers: Vec<LayerParams>,
}

impl MambaParams {
    pub fn all_finite(&self) -> bool {
        self.embedding.all_finite()
            && self.layers.iter().all(|l| {
                l.w_in.all_finite()
                    && l.w_delta.all_finite()
                    && l.b_delta.iter().all(|v| v.is_finite())
                    && l.w_b.all_finite()
                    && l.w_c.all_finite()
                    && l.a.all_finite()
                    && l.w_out.all_finite()
            })
    }

    pub fn a_strictly_negative(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.a.data().iter().all(|&v| v < 0.0))
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> DenseMatrix {
    let std = 1.0 / (cols as f64).sqrt();
    let mut m = DenseMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m.set(r, c, rng.normal() * std);
        }
    }
    m
}

/// Initialize all encoder weights from the "init" stream of `seed`.
///
/// The diagonal state matrix A starts at the HiPPO-LegS diagonal -(n+1),
/// identical for every channel; b_delta starts where softplus gives 0.01.
pub fn init_params(config: &EncoderConfig, vocab_size: usize, seed: u64) -> Result<MambaParams> {
    let mut rng = rng_derive(seed, "init");
    let d_model = config.d_model;
    let d_inner = config.d_inner();
    let d_state = config.d_state;

    let hippo = hippo_legs_matrix(d_state)?;
    let mut a = DenseMatrix::zeros(d_inner, d_state);
    for ch in 0..d_inner {
        for n in 0..d_state {
            a.set(ch, n, hippo.get(n, n));
        }
    }

    // softplus(b) = 0.01  =>  b = ln(e^0.01 - 1)
    let b_delta_init = (0.01f64.exp() - 1.0).ln();

    let embedding = random_matrix(vocab_size, d_model, &mut rng);
    let layers = (0..config.n_layers)
        .map(|_| LayerParams {
            w_in: random_matrix(d_inner, d_model, &mut rng),
            w_delta: random_matrix(d_inner, d_inner, &mut rng),
            b_delta: vec![b_delta_init; d_inner],
            w_b: random_matrix(d_state, d_inner, &mut rng),
            w_c: random_matrix(d_state, d_inner, &mut rng),
            a: a.clone(),
            w_out: random_matrix(d_model, d_inner, &mut rng),
        })
        .collect();

    Ok(MambaParams { embedding, layers })
}
