//! Inference-mode encoding: token embedding, per-layer selective SSM with
//! residual connection, and pooling into one representation vector.

use crate::encoder::params::{EncoderConfig, MambaParams, Pooling, ScanMode};
use crate::encoder::scan::{selective_scan_parallel, selective_scan_seq, zoh};
use crate::encoder::vocab::{tokenize, Vocabulary};
use crate::error::{Error, Result};
use crate::lora::{lora_effective, LoraStack};
use crate::numerics::{softplus, DenseMatrix};

/// Pooled representation of one text. `empty` marks a text with no tokens;
/// its vector is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbedding {
    pub values: Vec<f64>,
    pub empty: bool,
}

pub(crate) struct EffectiveWeights {
    pub w_in: DenseMatrix,
    pub w_out: DenseMatrix,
}

pub(crate) fn effective_layer_weights(
    params: &MambaParams,
    adapters: Option<&LoraStack>,
    layer: usize,
) -> Result<EffectiveWeights> {
    let base = &params.layers[layer];
    match adapters {
        None => Ok(EffectiveWeights {
            w_in: base.w_in.clone(),
            w_out: base.w_out.clone(),
        }),
        Some(stack) => {
            let la = stack.layers.get(layer).ok_or_else(|| {
                Error::Shape(format!("adapter stack has no layer {layer}"))
            })?;
            Ok(EffectiveWeights {
                w_in: lora_effective(&base.w_in, &la.w_in)?,
                w_out: lora_effective(&base.w_out, &la.w_out)?,
            })
        }
    }
}

/// Run one SSM layer over the sequence `x` (steps x d_model, row-major).
/// Returns the layer output including the residual connection.
pub(crate) fn layer_forward_merged(
    x: &[f64],
    steps: usize,
    weights: &EffectiveWeights,
    layer: &crate::encoder::params::LayerParams,
    config: &EncoderConfig,
) -> Result<Vec<f64>> {
    let d_model = config.d_model;
    let d_inner = config.d_inner();
    let d_state = config.d_state;
    let thr = config.delta_taylor_threshold;

    let mut u = vec![0.0; steps * d_inner];
    let mut delta = vec![0.0; steps * d_inner];
    let mut bk = vec![0.0; steps * d_state];
    let mut ck = vec![0.0; steps * d_state];
    for t in 0..steps {
        let xt = &x[t * d_model..(t + 1) * d_model];
        let ut = weights.w_in.matvec(xt)?;
        let st = layer.w_delta.matvec(&ut)?;
        for ch in 0..d_inner {
            delta[t * d_inner + ch] = softplus(st[ch] + layer.b_delta[ch]);
        }
        bk[t * d_state..(t + 1) * d_state].copy_from_slice(&layer.w_b.matvec(&ut)?);
        ck[t * d_state..(t + 1) * d_state].copy_from_slice(&layer.w_c.matvec(&ut)?);
        u[t * d_inner..(t + 1) * d_inner].copy_from_slice(&ut);
    }

    // Per-channel scan over the discretized recurrence.
    let mut y = vec![0.0; steps * d_inner];
    let mut a_bars = vec![0.0; steps * d_state];
    let mut drives = vec![0.0; steps * d_state];
    for ch in 0..d_inner {
        for t in 0..steps {
            let dt = delta[t * d_inner + ch];
            let ut = u[t * d_inner + ch];
            for n in 0..d_state {
                let (a_bar, b_bar) = zoh(dt, layer.a.get(ch, n), bk[t * d_state + n], thr);
                a_bars[t * d_state + n] = a_bar;
                drives[t * d_state + n] = b_bar * ut;
            }
        }
        let ys = match config.scan {
            ScanMode::Sequential => selective_scan_seq(&a_bars, &drives, &ck, d_state)?,
            ScanMode::Parallel => selective_scan_parallel(&a_bars, &drives, &ck, d_state)?,
        };
        for t in 0..steps {
            y[t * d_inner + ch] = ys[t];
        }
    }

    let mut out = vec![0.0; steps * d_model];
    for t in 0..steps {
        let yt = &y[t * d_inner..(t + 1) * d_inner];
        let ot = weights.w_out.matvec(yt)?;
        for d in 0..d_model {
            out[t * d_model + d] = ot[d] + x[t * d_model + d];
        }
    }
    Ok(out)
}

pub(crate) fn embed_tokens(
    tokens: &[usize],
    params: &MambaParams,
    d_model: usize,
) -> Result<Vec<f64>> {
    let mut x = vec![0.0; tokens.len() * d_model];
    for (t, &id) in tokens.iter().enumerate() {
        if id >= params.embedding.rows() {
            return Err(Error::Internal(format!(
                "token id {id} outside embedding table of {} rows",
                params.embedding.rows()
            )));
        }
        x[t * d_model..(t + 1) * d_model].copy_from_slice(params.embedding.row(id));
    }
    Ok(x)
}

pub(crate) fn pool(seq: &[f64], steps: usize, d_model: usize, pooling: Pooling) -> Vec<f64> {
    match pooling {
        Pooling::MeanValid => {
            let mut out = vec![0.0; d_model];
            for t in 0..steps {
                for d in 0..d_model {
                    out[d] += seq[t * d_model + d];
                }
            }
            for v in &mut out {
                *v /= steps as f64;
            }
            out
        }
        Pooling::LastPosition => seq[(steps - 1) * d_model..steps * d_model].to_vec(),
    }
}

/// Encode one preprocessed text into a d_model vector. Adapters (if any)
/// are merged into the projections; there is no dropout at inference.
pub fn encode(
    text: &str,
    vocab: &Vocabulary,
    params: &MambaParams,
    adapters: Option<&LoraStack>,
    config: &EncoderConfig,
) -> Result<TextEmbedding> {
    let tokens = tokenize(text, vocab, config.max_len);
    if tokens.is_empty() {
        return Ok(TextEmbedding {
            values: vec![0.0; config.d_model],
            empty: true,
        });
    }
    let steps = tokens.len();
    let mut x = embed_tokens(&tokens, params, config.d_model)?;
    for layer_idx in 0..params.layers.len() {
        let weights = effective_layer_weights(params, adapters, layer_idx)?;
        x = layer_forward_merged(&x, steps, &weights, &params.layers[layer_idx], config)?;
    }
    Ok(TextEmbedding {
        values: pool(&x, steps, config.d_model, config.pooling),
        empty: false,
    })
}

/// H_rs: review representation followed by sentence representation.
pub fn encode_pair(
    review_text: &str,
    sentence_text: &str,
    vocab: &Vocabulary,
    params: &MambaParams,
    adapters: Option<&LoraStack>,
    config: &EncoderConfig,
) -> Result<TextEmbedding> {
    let review = encode(review_text, vocab, params, adapters, config)?;
    let sentence = encode(sentence_text, vocab, params, adapters, config)?;
    let mut values = review.values;
    values.extend_from_slice(&sentence.values);
    Ok(TextEmbedding {
        values,
        empty: review.empty && sentence.empty,
    })
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
