//! Training-mode forward and reverse-mode backward for the encoder.
//!
//! Base weights stay frozen: gradients accumulate only into the adapter
//! factors. Hidden states are not kept from the forward pass; the backward
//! pass recomputes them chunk by chunk from checkpointed boundary states
//! (a stored-state mode exists as the reference for that recomputation).

use crate::encoder::forward::{embed_tokens, pool};
use crate::encoder::params::{EncoderConfig, MambaParams, Pooling};
use crate::encoder::scan::zoh_with_grads;
use crate::encoder::vocab::{tokenize, Vocabulary};
use crate::error::{Error, Result};
use crate::lora::LoraStack;
use crate::numerics::{sigmoid, softplus, DenseMatrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardMode {
    /// Recompute hidden states in fixed-size chunks during backward.
    Chunked(usize),
    /// Keep every hidden state from the forward pass (reference path).
    Stored,
}

/// Dropout masks for one layer's adapter inputs. `true` keeps the value.
#[derive(Debug, Clone)]
pub struct LayerMasks {
    pub w_in: Option<Vec<bool>>,  // steps x d_model
    pub w_out: Option<Vec<bool>>, // steps x d_inner
}

/// Pre-drawn dropout decisions for one text, so a forward/backward pair
/// (and any finite-difference probe around it) sees identical noise.
#[derive(Debug, Clone)]
pub struct TrainNoise {
    pub layers: Vec<LayerMasks>,
}

impl TrainNoise {
    pub fn none(n_layers: usize) -> Self {
        Self {
            layers: (0..n_layers)
                .map(|_| LayerMasks {
                    w_in: None,
                    w_out: None,
                })
                .collect(),
        }
    }

    /// Draw masks for a text of `steps` tokens at drop probability `p`.
    pub fn draw(config: &EncoderConfig, steps: usize, p: f64, rng: &mut RngStream) -> Self {
        if p <= 0.0 {
            return Self::none(config.n_layers);
        }
        let layers = (0..config.n_layers)
            .map(|_| LayerMasks {
                w_in: Some((0..steps * config.d_model).map(|_| rng.uniform() >= p).collect()),
                w_out: Some(
                    (0..steps * config.d_inner())
                        .map(|_| rng.uniform() >= p)
                        .collect(),
                ),
            })
            .collect();
        Self { layers }
    }
}

fn apply_mask(values: &[f64], mask: Option<&Vec<bool>>, p: f64) -> Vec<f64> {
    match mask {
        None => values.to_vec(),
        Some(mask) => {
            let keep_scale = 1.0 / (1.0 - p);
            values
                .iter()
                .zip(mask)
                .map(|(v, &keep)| if keep { v * keep_scale } else { 0.0 })
                .collect()
        }
    }
}

/// Everything the backward pass needs from one layer's forward run.
#[derive(Debug, Clone)]
struct LayerTrace {
    x: Vec<f64>,     // steps x d_model (layer input)
    u: Vec<f64>,     // steps x d_inner
    s: Vec<f64>,     // steps x d_inner (pre-softplus, includes b_delta)
    delta: Vec<f64>, // steps x d_inner
    bk: Vec<f64>,    // steps x d_state
    ck: Vec<f64>,    // steps x d_state
    y: Vec<f64>,     // steps x d_inner (scan outputs)
    /// Hidden state before each chunk (chunked mode), or empty.
    h_checkpoints: Vec<Vec<f64>>,
    /// Hidden state after every step (stored mode), or empty.
    h_full: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct EncodeTrace {
    steps: usize,
    layers: Vec<LayerTrace>,
    pub pooled: Vec<f64>,
    pub empty: bool,
}

/// Gradients for one layer's adapter factors.
#[derive(Debug, Clone)]
pub struct LayerAdapterGrads {
    pub w_in_a: DenseMatrix,
    pub w_in_b: DenseMatrix,
    pub w_out_a: DenseMatrix,
    pub w_out_b: DenseMatrix,
}

#[derive(Debug, Clone)]
pub struct AdapterGrads {
    pub layers: Vec<LayerAdapterGrads>,
}

impl AdapterGrads {
    pub fn zeros_like(stack: &LoraStack) -> Self {
        Self {
            layers: stack
                .layers
                .iter()
                .map(|l| LayerAdapterGrads {
                    w_in_a: DenseMatrix::zeros(l.w_in.a_down.rows(), l.w_in.a_down.cols()),
                    w_in_b: DenseMatrix::zeros(l.w_in.b_up.rows(), l.w_in.b_up.cols()),
                    w_out_a: DenseMatrix::zeros(l.w_out.a_down.rows(), l.w_out.a_down.cols()),
                    w_out_b: DenseMatrix::zeros(l.w_out.b_up.rows(), l.w_out.b_up.cols()),
                })
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| {
                [&l.w_in_a, &l.w_in_b, &l.w_out_a, &l.w_out_b]
                    .into_iter()
                    .flat_map(|m| m.data().iter().copied())
            })
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

fn chunk_size(mode: BackwardMode, config: &EncoderConfig) -> usize {
    match mode {
        BackwardMode::Chunked(n) if n > 0 => n,
        BackwardMode::Chunked(_) => config.backward_chunk.max(1),
        BackwardMode::Stored => usize::MAX,
    }
}

/// Training-mode forward pass with the adapter branch kept separate so its
/// input dropout can apply. Returns the caches the backward pass consumes.
pub fn encode_forward_train(
    text: &str,
    vocab: &Vocabulary,
    params: &MambaParams,
    adapters: Option<&LoraStack>,
    config: &EncoderConfig,
    noise: Option<&TrainNoise>,
    mode: BackwardMode,
) -> Result<EncodeTrace> {
    let tokens = tokenize(text, vocab, config.max_len);
    let d_model = config.d_model;
    if tokens.is_empty() {
        return Ok(EncodeTrace {
            steps: 0,
            layers: Vec::new(),
            pooled: vec![0.0; d_model],
            empty: true,
        });
    }
    let steps = tokens.len();
    let d_inner = config.d_inner();
    let d_state = config.d_state;
    let thr = config.delta_taylor_threshold;
    let chunk = chunk_size(mode, config);

    let mut x = embed_tokens(&tokens, params, d_model)?;
    let mut traces = Vec::with_capacity(params.layers.len());

    for (layer_idx, layer) in params.layers.iter().enumerate() {
        let la = adapters.map(|s| &s.layers[layer_idx]);
        let masks = noise.map(|n| &n.layers[layer_idx]);

        let mut u = vec![0.0; steps * d_inner];
        let mut s = vec![0.0; steps * d_inner];
        let mut delta = vec![0.0; steps * d_inner];
        let mut bk = vec![0.0; steps * d_state];
        let mut ck = vec![0.0; steps * d_state];
        for t in 0..steps {
            let xt = &x[t * d_model..(t + 1) * d_model];
            let mut ut = layer.w_in.matvec(xt)?;
            if let Some(la) = la {
                let mask_t = masks
                    .and_then(|m| m.w_in.as_ref())
                    .map(|full| full[t * d_model..(t + 1) * d_model].to_vec());
                let masked = apply_mask(xt, mask_t.as_ref(), la.w_in.dropout);
                let q = la.w_in.a_down.matvec(&masked)?;
                let up = la.w_in.b_up.matvec(&q)?;
                let scale = la.w_in.scale();
                for (uv, add) in ut.iter_mut().zip(&up) {
                    *uv += scale * add;
                }
            }
            let st = layer.w_delta.matvec(&ut)?;
            for ch in 0..d_inner {
                let sv = st[ch] + layer.b_delta[ch];
                s[t * d_inner + ch] = sv;
                delta[t * d_inner + ch] = softplus(sv);
            }
            bk[t * d_state..(t + 1) * d_state].copy_from_slice(&layer.w_b.matvec(&ut)?);
            ck[t * d_state..(t + 1) * d_state].copy_from_slice(&layer.w_c.matvec(&ut)?);
            u[t * d_inner..(t + 1) * d_inner].copy_from_slice(&ut);
        }

        // Sequential recurrence with boundary-state checkpoints.
        let mut h = vec![0.0; d_inner * d_state];
        let mut y = vec![0.0; steps * d_inner];
        let mut h_checkpoints = Vec::new();
        let mut h_full = Vec::new();
        for t in 0..steps {
            if mode != BackwardMode::Stored && t % chunk == 0 {
                h_checkpoints.push(h.clone());
            }
            for ch in 0..d_inner {
                let dt = delta[t * d_inner + ch];
                let ut = u[t * d_inner + ch];
                let mut out = 0.0;
                for n in 0..d_state {
                    let (a_bar, b_bar, _, _, _) =
                        zoh_with_grads(dt, layer.a.get(ch, n), bk[t * d_state + n], thr);
                    let idx = ch * d_state + n;
                    h[idx] = a_bar * h[idx] + b_bar * ut;
                    out += ck[t * d_state + n] * h[idx];
                }
                y[t * d_inner + ch] = out;
            }
            if mode == BackwardMode::Stored {
                h_full.push(h.clone());
            }
        }

        let mut out = vec![0.0; steps * d_model];
        for t in 0..steps {
            let yt = &y[t * d_inner..(t + 1) * d_inner];
            let mut ot = layer.w_out.matvec(yt)?;
            if let Some(la) = la {
                let mask_t = masks
                    .and_then(|m| m.w_out.as_ref())
                    .map(|full| full[t * d_inner..(t + 1) * d_inner].to_vec());
                let masked = apply_mask(yt, mask_t.as_ref(), la.w_out.dropout);
                let q = la.w_out.a_down.matvec(&masked)?;
                let up = la.w_out.b_up.matvec(&q)?;
                let scale = la.w_out.scale();
                for (ov, add) in ot.iter_mut().zip(&up) {
                    *ov += scale * add;
                }
            }
            for d in 0..d_model {
                out[t * d_model + d] = ot[d] + x[t * d_model + d];
            }
        }

        traces.push(LayerTrace {
            x: std::mem::replace(&mut x, out),
            u,
            s,
            delta,
            bk,
            ck,
            y,
            h_checkpoints,
            h_full,
        });
    }

    let pooled = pool(&x, steps, d_model, config.pooling);
    Ok(EncodeTrace {
        steps,
        layers: traces,
        pooled,
        empty: false,
    })
}

/// Backpropagate `upstream` (gradient w.r.t. the pooled embedding of one
/// text) through the trace, accumulating into `grads`.
pub fn encode_backward_trace(
    trace: &EncodeTrace,
    upstream: &[f64],
    params: &MambaParams,
    adapters: &LoraStack,
    config: &EncoderConfig,
    noise: Option<&TrainNoise>,
    mode: BackwardMode,
    grads: &mut AdapterGrads,
) -> Result<()> {
    let d_model = config.d_model;
    if upstream.len() != d_model {
        return Err(Error::Shape(format!(
            "upstream gradient has length {}, expected {}",
            upstream.len(),
            d_model
        )));
    }
    if trace.empty {
        return Ok(());
    }
    let steps = trace.steps;
    let d_inner = config.d_inner();
    let d_state = config.d_state;
    let thr = config.delta_taylor_threshold;
    let chunk = chunk_size(mode, config);

    // Pooling backward.
    let mut g_o = vec![0.0; steps * d_model];
    match config.pooling {
        Pooling::MeanValid => {
            for t in 0..steps {
                for d in 0..d_model {
                    g_o[t * d_model + d] = upstream[d] / steps as f64;
                }
            }
        }
        Pooling::LastPosition => {
            g_o[(steps - 1) * d_model..].copy_from_slice(upstream);
        }
    }

    for layer_idx in (0..params.layers.len()).rev() {
        let layer = &params.layers[layer_idx];
        let la = &adapters.layers[layer_idx];
        let lt = &trace.layers[layer_idx];
        let masks = noise.map(|n| &n.layers[layer_idx]);
        let lg = &mut grads.layers[layer_idx];

        // Residual path.
        let mut g_x = g_o.clone();

        // Out-projection (base + adapter branch).
        let mut g_y = vec![0.0; steps * d_inner];
        let scale_out = la.w_out.scale();
        for t in 0..steps {
            let got = &g_o[t * d_model..(t + 1) * d_model];
            for ch in 0..d_inner {
                let mut acc = 0.0;
                for d in 0..d_model {
                    acc += layer.w_out.get(d, ch) * got[d];
                }
                g_y[t * d_inner + ch] = acc;
            }

            let yt = &lt.y[t * d_inner..(t + 1) * d_inner];
            let mask_t = masks
                .and_then(|m| m.w_out.as_ref())
                .map(|full| full[t * d_inner..(t + 1) * d_inner].to_vec());
            let masked = apply_mask(yt, mask_t.as_ref(), la.w_out.dropout);
            let q = la.w_out.a_down.matvec(&masked)?;
            let rank = la.w_out.rank;
            let mut gq = vec![0.0; rank];
            for r in 0..rank {
                let mut acc = 0.0;
                for d in 0..d_model {
                    acc += la.w_out.b_up.get(d, r) * got[d];
                }
                gq[r] = scale_out * acc;
            }
            for d in 0..d_model {
                for r in 0..rank {
                    lg.w_out_b
                        .set(d, r, lg.w_out_b.get(d, r) + scale_out * got[d] * q[r]);
                }
            }
            for r in 0..rank {
                for ch in 0..d_inner {
                    lg.w_out_a
                        .set(r, ch, lg.w_out_a.get(r, ch) + gq[r] * masked[ch]);
                }
            }
            // gradient back into y through the (masked) adapter branch
            let keep_scale = 1.0 / (1.0 - la.w_out.dropout);
            for ch in 0..d_inner {
                let mut acc = 0.0;
                for r in 0..rank {
                    acc += la.w_out.a_down.get(r, ch) * gq[r];
                }
                let mask_factor = match &mask_t {
                    Some(m) => {
                        if m[ch] {
                            keep_scale
                        } else {
                            0.0
                        }
                    }
                    None => 1.0,
                };
                g_y[t * d_inner + ch] += mask_factor * acc;
            }
        }

        // Scan backward with chunked state recomputation.
        let mut g_delta = vec![0.0; steps * d_inner];
        let mut g_bk = vec![0.0; steps * d_state];
        let mut g_ck = vec![0.0; steps * d_state];
        let mut g_u = vec![0.0; steps * d_inner];

        let mut lambda = vec![0.0; d_inner * d_state];
        // a_bar at step t+1, kept from the previously processed step.
        let mut abar_next = vec![0.0; d_inner * d_state];
        let n_chunks = if mode == BackwardMode::Stored {
            1
        } else {
            steps.div_ceil(chunk)
        };
        for chunk_idx in (0..n_chunks).rev() {
            let (start, end) = if mode == BackwardMode::Stored {
                (0, steps)
            } else {
                (chunk_idx * chunk, ((chunk_idx + 1) * chunk).min(steps))
            };

            // Hidden states h_{start-1} .. h_{end-1} for this span.
            let span_states: Vec<Vec<f64>> = if mode == BackwardMode::Stored {
                let mut v = Vec::with_capacity(steps + 1);
                v.push(vec![0.0; d_inner * d_state]);
                v.extend(lt.h_full.iter().cloned());
                v
            } else {
                let mut v = Vec::with_capacity(end - start + 1);
                let mut h = lt.h_checkpoints[chunk_idx].clone();
                v.push(h.clone());
                for t in start..end {
                    for ch in 0..d_inner {
                        let dt = lt.delta[t * d_inner + ch];
                        let ut = lt.u[t * d_inner + ch];
                        for n in 0..d_state {
                            let (a_bar, b_bar, _, _, _) =
                                zoh_with_grads(dt, layer.a.get(ch, n), lt.bk[t * d_state + n], thr);
                            let idx = ch * d_state + n;
                            h[idx] = a_bar * h[idx] + b_bar * ut;
                        }
                    }
                    v.push(h.clone());
                }
                v
            };

            for t in (start..end).rev() {
                let h_prev = &span_states[t - start];
                let h_now = &span_states[t - start + 1];
                let last_step = t + 1 == steps;
                for ch in 0..d_inner {
                    let dt = lt.delta[t * d_inner + ch];
                    let ut = lt.u[t * d_inner + ch];
                    let gy = g_y[t * d_inner + ch];
                    let mut gd_acc = 0.0;
                    let mut gu_acc = 0.0;
                    for n in 0..d_state {
                        let idx = ch * d_state + n;
                        let (a_bar, b_bar, da_dd, db_dd, db_db) =
                            zoh_with_grads(dt, layer.a.get(ch, n), lt.bk[t * d_state + n], thr);
                        let seed = gy * lt.ck[t * d_state + n];
                        let decay = if last_step {
                            0.0
                        } else {
                            abar_next[idx] * lambda[idx]
                        };
                        let lam = seed + decay;

                        g_ck[t * d_state + n] += gy * h_now[idx];
                        let g_abar = lam * h_prev[idx];
                        let g_drive = lam;
                        gd_acc += g_abar * da_dd + g_drive * ut * db_dd;
                        g_bk[t * d_state + n] += g_drive * ut * db_db;
                        gu_acc += g_drive * b_bar;

                        lambda[idx] = lam;
                        abar_next[idx] = a_bar;
                    }
                    g_delta[t * d_inner + ch] += gd_acc;
                    g_u[t * d_inner + ch] += gu_acc;
                }
            }
        }

        // Through the B/C/delta projections back into u.
        for t in 0..steps {
            for ch in 0..d_inner {
                let mut acc = 0.0;
                for n in 0..d_state {
                    acc += layer.w_b.get(n, ch) * g_bk[t * d_state + n]
                        + layer.w_c.get(n, ch) * g_ck[t * d_state + n];
                }
                g_u[t * d_inner + ch] += acc;
            }
            // delta = softplus(s): d delta / d s = sigmoid(s)
            let mut g_s = vec![0.0; d_inner];
            for ch in 0..d_inner {
                g_s[ch] = g_delta[t * d_inner + ch] * sigmoid(lt.s[t * d_inner + ch]);
            }
            for ch in 0..d_inner {
                let mut acc = 0.0;
                for row in 0..d_inner {
                    acc += layer.w_delta.get(row, ch) * g_s[row];
                }
                g_u[t * d_inner + ch] += acc;
            }
        }

        // In-projection (base + adapter branch) into the layer input.
        let scale_in = la.w_in.scale();
        for t in 0..steps {
            let gut = &g_u[t * d_inner..(t + 1) * d_inner];
            for d in 0..d_model {
                let mut acc = 0.0;
                for ch in 0..d_inner {
                    acc += layer.w_in.get(ch, d) * gut[ch];
                }
                g_x[t * d_model + d] += acc;
            }

            let xt = &lt.x[t * d_model..(t + 1) * d_model];
            let mask_t = masks
                .and_then(|m| m.w_in.as_ref())
                .map(|full| full[t * d_model..(t + 1) * d_model].to_vec());
            let masked = apply_mask(xt, mask_t.as_ref(), la.w_in.dropout);
            let q = la.w_in.a_down.matvec(&masked)?;
            let rank = la.w_in.rank;
            let mut gq = vec![0.0; rank];
            for r in 0..rank {
                let mut acc = 0.0;
                for ch in 0..d_inner {
                    acc += la.w_in.b_up.get(ch, r) * gut[ch];
                }
                gq[r] = scale_in * acc;
            }
            for ch in 0..d_inner {
                for r in 0..rank {
                    lg.w_in_b
                        .set(ch, r, lg.w_in_b.get(ch, r) + scale_in * gut[ch] * q[r]);
                }
            }
            for r in 0..rank {
                for d in 0..d_model {
                    lg.w_in_a
                        .set(r, d, lg.w_in_a.get(r, d) + gq[r] * masked[d]);
                }
            }
            let keep_scale = 1.0 / (1.0 - la.w_in.dropout);
            for d in 0..d_model {
                let mut acc = 0.0;
                for r in 0..rank {
                    acc += la.w_in.a_down.get(r, d) * gq[r];
                }
                let mask_factor = match &mask_t {
                    Some(m) => {
                        if m[d] {
                            keep_scale
                        } else {
                            0.0
                        }
                    }
                    None => 1.0,
                };
                g_x[t * d_model + d] += mask_factor * acc;
            }
        }

        g_o = g_x;
    }

    Ok(())
}

/// Spec surface: run the training forward over a batch of texts, then
/// backpropagate the given per-text upstream gradients into the adapters.
#[allow(clippy::too_many_arguments)]
pub fn encode_batch_backward(
    texts: &[&str],
    upstreams: &[Vec<f64>],
    vocab: &Vocabulary,
    params: &MambaParams,
    adapters: Option<&LoraStack>,
    config: &EncoderConfig,
    noises: Option<&[TrainNoise]>,
    mode: BackwardMode,
) -> Result<AdapterGrads> {
    let stack = adapters.ok_or(Error::NoTrainableParams)?;
    if texts.len() != upstreams.len() {
        return Err(Error::Shape(format!(
            "{} texts with {} upstream gradients",
            texts.len(),
            upstreams.len()
        )));
    }
    let mut grads = AdapterGrads::zeros_like(stack);
    for (i, text) in texts.iter().enumerate() {
        let noise = noises.map(|n| &n[i]);
        let trace =
            encode_forward_train(text, vocab, params, Some(stack), config, noise, mode)?;
        encode_backward_trace(
            &trace,
            &upstreams[i],
            params,
            stack,
            config,
            noise,
            mode,
            &mut grads,
        )?;
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::forward::encode;
    use crate::encoder::params::init_params;
    use crate::encoder::vocab::build_vocab;
    use crate::lora::init_adapters;
    use crate::numerics::rng_derive;

    fn setup(seed: u64) -> (Vocabulary, MambaParams, LoraStack, EncoderConfig) {
        let config = EncoderConfig {
            d_model: 8,
            expand: 2,
            d_state: 4,
            n_layers: 2,
            backward_chunk: 3,
            ..EncoderConfig::default()
        };
        let vocab =
            build_vocab(&["the coffee tastes great today", "shipping was slow again sadly"])
                .unwrap();
        let params = init_params(&config, vocab.len(), seed).unwrap();
        let mut adapters = init_adapters(&config, 2, 32.0, 0.1, seed);
        // Randomize the up-factors so gradients flow into both matrices.
        let mut rng = rng_derive(seed, "test/b-up");
        for layer in &mut adapters.layers {
            for m in [&mut layer.w_in.b_up, &mut layer.w_out.b_up] {
                for r in 0..m.rows() {
                    for c in 0..m.cols() {
                        m.set(r, c, rng.normal() * 0.2);
                    }
                }
            }
        }
        (vocab, params, adapters, config)
    }

    #[test]
    fn train_forward_without_adapters_matches_eval_encode() {
        let (vocab, params, _, config) = setup(42);
        let text = "the coffee tastes great shipping was slow";
        let eval = encode(text, &vocab, &params, None, &config).unwrap();
        let train = encode_forward_train(
            text,
            &vocab,
            &params,
            None,
            &config,
            None,
            BackwardMode::Chunked(3),
        )
        .unwrap();
        assert_eq!(eval.values, train.pooled);
    }

    #[test]
    fn zero_upstream_gives_zero_adapter_grads() {
        let (vocab, params, adapters, config) = setup(42);
        let grads = encode_batch_backward(
            &["the coffee tastes great"],
            &[vec![0.0; config.d_model]],
            &vocab,
            &params,
            Some(&adapters),
            &config,
            None,
            BackwardMode::Chunked(3),
        )
        .unwrap();
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn missing_adapters_is_an_error() {
        let (vocab, params, _, config) = setup(42);
        let err = encode_batch_backward(
            &["the coffee"],
            &[vec![0.0; config.d_model]],
            &vocab,
            &params,
            None,
            &config,
            None,
            BackwardMode::Stored,
        );
        assert!(matches!(err, Err(Error::NoTrainableParams)));
    }

    /// Scalar loss for finite differences: dot(pooled, probe).
    fn probe_loss(
        text: &str,
        vocab: &Vocabulary,
        params: &MambaParams,
        adapters: &LoraStack,
        config: &EncoderConfig,
        noise: &TrainNoise,
        probe: &[f64],
    ) -> f64 {
        let trace = encode_forward_train(
            text,
            vocab,
            params,
            Some(adapters),
            config,
            Some(noise),
            BackwardMode::Stored,
        )
        .unwrap();
        trace.pooled.iter().zip(probe).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn adapter_gradients_match_finite_differences() {
        for seed in [1u64, 2, 3, 4, 5] {
            let (vocab, params, adapters, config) = setup(seed);
            let text = "the coffee tastes great shipping was slow again";
            let mut rng = rng_derive(seed, "test/probe");
            let probe: Vec<f64> = (0..config.d_model).map(|_| rng.normal()).collect();
            let steps = tokenize(text, &vocab, config.max_len).len();
            let mut noise_rng = rng_derive(seed, "test/masks");
            let noise = TrainNoise::draw(&config, steps, 0.1, &mut noise_rng);

            let mut grads = AdapterGrads::zeros_like(&adapters);
            let trace = encode_forward_train(
                text,
                &vocab,
                &params,
                Some(&adapters),
                &config,
                Some(&noise),
                BackwardMode::Chunked(3),
            )
            .unwrap();
            encode_backward_trace(
                &trace,
                &probe,
                &params,
                &adapters,
                &config,
                Some(&noise),
                BackwardMode::Chunked(3),
                &mut grads,
            )
            .unwrap();

            let eps = 1e-5;
            let mut checked = 0usize;
            for layer_idx in 0..adapters.layers.len() {
                // sample a handful of entries from each factor
                let entries: [(bool, bool); 4] =
                    [(true, true), (true, false), (false, true), (false, false)];
                for (is_in, is_a) in entries {
                    let (rows, cols) = {
                        let l = &adapters.layers[layer_idx];
                        let m = match (is_in, is_a) {
                            (true, true) => &l.w_in.a_down,
                            (true, false) => &l.w_in.b_up,
                            (false, true) => &l.w_out.a_down,
                            (false, false) => &l.w_out.b_up,
                        };
                        (m.rows(), m.cols())
                    };
                    for probe_idx in 0..3usize {
                        let r = (probe_idx * 7 + layer_idx) % rows;
                        let c = (probe_idx * 11 + layer_idx * 3) % cols;
                        let mut plus = adapters.clone();
                        let mut minus = adapters.clone();
                        {
                            let m = match (is_in, is_a) {
                                (true, true) => &mut plus.layers[layer_idx].w_in.a_down,
                                (true, false) => &mut plus.layers[layer_idx].w_in.b_up,
                                (false, true) => &mut plus.layers[layer_idx].w_out.a_down,
                                (false, false) => &mut plus.layers[layer_idx].w_out.b_up,
                            };
                            m.set(r, c, m.get(r, c) + eps);
                        }
                        {
                            let m = match (is_in, is_a) {
                                (true, true) => &mut minus.layers[layer_idx].w_in.a_down,
                                (true, false) => &mut minus.layers[layer_idx].w_in.b_up,
                                (false, true) => &mut minus.layers[layer_idx].w_out.a_down,
                                (false, false) => &mut minus.layers[layer_idx].w_out.b_up,
                            };
                            m.set(r, c, m.get(r, c) - eps);
                        }
                        let fd = (probe_loss(text, &vocab, &params, &plus, &config, &noise, &probe)
                            - probe_loss(text, &vocab, &params, &minus, &config, &noise, &probe))
                            / (2.0 * eps);
                        let an = {
                            let l = &grads.layers[layer_idx];
                            match (is_in, is_a) {
                                (true, true) => l.w_in_a.get(r, c),
                                (true, false) => l.w_in_b.get(r, c),
                                (false, true) => l.w_out_a.get(r, c),
                                (false, false) => l.w_out_b.get(r, c),
                            }
                        };
                        let denom = fd.abs().max(an.abs()).max(1e-6);
                        assert!(
                            (fd - an).abs() / denom <= 1e-4,
                            "seed {seed} layer {layer_idx} in={is_in} a={is_a} ({r},{c}): fd={fd} an={an}"
                        );
                        checked += 1;
                    }
                }
            }
            assert!(checked >= 24);
        }
    }

    #[test]
    fn chunked_recompute_equals_stored_backward() {
        let (vocab, params, adapters, config) = setup(42);
        let text = "the coffee tastes great shipping was slow again sadly today";
        let probe: Vec<f64> = (0..config.d_model).map(|i| (i as f64 + 1.0) * 0.1).collect();

        let run = |mode: BackwardMode| {
            let mut grads = AdapterGrads::zeros_like(&adapters);
            let trace = encode_forward_train(
                text, &vocab, &params, Some(&adapters), &config, None, mode,
            )
            .unwrap();
            encode_backward_trace(
                &trace, &probe, &params, &adapters, &config, None, mode, &mut grads,
            )
            .unwrap();
            grads
        };

        let chunked = run(BackwardMode::Chunked(3));
        let stored = run(BackwardMode::Stored);
        for (c, s) in chunked.layers.iter().zip(&stored.layers) {
            for (mc, ms) in [
                (&c.w_in_a, &s.w_in_a),
                (&c.w_in_b, &s.w_in_b),
                (&c.w_out_a, &s.w_out_a),
                (&c.w_out_b, &s.w_out_b),
            ] {
                for (a, b) in mc.data().iter().zip(ms.data()) {
                    assert!((a - b).abs() <= 1e-10, "chunked {a} vs stored {b}");
                }
            }
        }
    }
}
