//! Training over a prepared dataset: the head-only regime (encoder frozen,
//! features cached) and LoRA fine-tuning (gradients flow end to end into
//! adapter factors and head parameters).

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::checkpoint::{Checkpoint, FORMAT_TAG};
use crate::classifier::batchnorm::BatchNormState;
use crate::classifier::dropout::{apply_dropout_mask, draw_dropout_mask};
use crate::classifier::linear::{linear_forward, LinearHead};
use crate::classifier::loss::bce_loss;
use crate::classifier::optim::{
    adamw_step, onecycle_lr, AdamwConfig, OneCycleSchedule, ParamState,
};
use crate::compression::{compress, compress_backward, fit_compressor, PoincareCompressor};
use crate::config::RunConfig;
use crate::encoder::{
    build_vocab, encode_backward_trace, encode_forward_train, init_params, tokenize, AdapterGrads,
    BackwardMode, EncoderConfig, MambaParams, TrainNoise, Vocabulary,
};
use crate::error::{Error, Result};
use crate::lora::{init_adapters, LoraStack};
use crate::numerics::{rng_derive, sigmoid};
use crate::text::PreparedReview;

#[derive(Debug, Clone)]
pub struct TrainSample {
    pub review_repr: String,
    pub sentence: String,
    pub label: f64,
}

/// Labeled sentences paired with their review representation; unlabeled
/// sentences are excluded from supervised training.
pub fn collect_samples(prepared: &[PreparedReview]) -> Vec<TrainSample> {
    let mut out = Vec::new();
    for review in prepared {
        let repr = review.review_repr_text();
        for s in &review.sentences {
            if let Some(label) = s.label {
                out.push(TrainSample {
                    review_repr: repr.clone(),
                    sentence: s.text.clone(),
                    label: label as f64,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// "step" rows carry per-batch training loss; "epoch" rows carry the
    /// epoch's mean loss plus eval-mode training accuracy.
    pub kind: &'static str,
    pub phase: &'static str,
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub accuracy: Option<f64>,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub trace: Vec<TraceRow>,
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(b"kind,phase,epoch,step,loss,accuracy\n")?;
    for row in rows {
        let acc = row.accuracy.map(|a| a.to_string()).unwrap_or_default();
        writeln!(
            file,
            "{},{},{},{},{},{}",
            row.kind, row.phase, row.epoch, row.step, row.loss, acc
        )?;
    }
    Ok(())
}

fn check_label_balance(samples: &[TrainSample]) -> Result<()> {
    let positives = samples.iter().filter(|s| s.label == 1.0).count();
    if positives == 0 || positives == samples.len() {
        return Err(Error::DegenerateLabels);
    }
    Ok(())
}

/// Chunk a permutation into training batches, dropping a trailing batch of
/// one (train-mode batch norm needs at least two samples).
fn epoch_batches(perm: &[usize], batch: usize) -> Vec<Vec<usize>> {
    perm.chunks(batch)
        .filter(|c| c.len() >= 2)
        .map(|c| c.to_vec())
        .collect()
}

fn encode_pair_cached<'a>(
    cache: &'a mut HashMap<String, Vec<f64>>,
    text: &str,
    vocab: &Vocabulary,
    params: &MambaParams,
    config: &EncoderConfig,
) -> Result<&'a Vec<f64>> {
    if !cache.contains_key(text) {
        let e = crate::encoder::encode(text, vocab, params, None, config)?;
        cache.insert(text.to_string(), e.values);
    }
    Ok(cache.get(text).unwrap())
}

fn eval_accuracy_on_features(
    features: &[Vec<f64>],
    labels: &[f64],
    bn: &BatchNormState,
    head: &LinearHead,
) -> Result<f64> {
    let mut correct = 0usize;
    for (f, &label) in features.iter().zip(labels) {
        let normed = bn.forward_eval(f)?;
        let p = sigmoid(linear_forward(&normed, head)?);
        let predicted = if p >= 0.5 { 1.0 } else { 0.0 };
        if predicted == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / features.len() as f64)
}

struct HeadGrads {
    w: Vec<f64>,
    b: f64,
    gamma: Vec<f64>,
    beta: Vec<f64>,
    features: Vec<Vec<f64>>,
    loss: f64,
}

/// Shared forward/backward for one head batch: batchnorm(train) ->
/// dropout -> linear -> BCE, returning gradients down to the features.
fn head_batch_grads(
    batch_features: &[Vec<f64>],
    batch_labels: &[f64],
    bn: &mut BatchNormState,
    head: &LinearHead,
    dropout_p: f64,
    mask_stream: &mut crate::numerics::RngStream,
) -> Result<HeadGrads> {
    let n = bn.n_features();
    let (bn_out, cache) = bn.forward_train(batch_features)?;
    let masks: Vec<Vec<bool>> = (0..bn_out.len())
        .map(|_| draw_dropout_mask(n, dropout_p, mask_stream))
        .collect();
    let dropped: Vec<Vec<f64>> = bn_out
        .iter()
        .zip(&masks)
        .map(|(row, mask)| apply_dropout_mask(row, mask, dropout_p))
        .collect();
    let logits: Vec<f64> = dropped
        .iter()
        .map(|row| linear_forward(row, head))
        .collect::<Result<_>>()?;
    let (loss, g_logits) = bce_loss(&logits, batch_labels)?;

    let mut g_w = vec![0.0; n];
    let mut g_b = 0.0;
    let keep_scale = 1.0 / (1.0 - dropout_p);
    let mut g_bn_out = vec![vec![0.0; n]; dropped.len()];
    for (i, gl) in g_logits.iter().enumerate() {
        g_b += gl;
        for f in 0..n {
            g_w[f] += gl * dropped[i][f];
            let g_drop = gl * head.w[f];
            g_bn_out[i][f] = if masks[i][f] { g_drop * keep_scale } else { 0.0 };
        }
    }
    let (g_features, g_gamma, g_beta) = bn.backward(&cache, &g_bn_out);
    Ok(HeadGrads {
        w: g_w,
        b: g_b,
        gamma: g_gamma,
        beta: g_beta,
        features: g_features,
        loss,
    })
}

/// Train only the head (batch-norm affine + linear) on cached features
/// from a frozen, freshly initialized encoder.
pub fn train_head(prepared: &[PreparedReview], config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let samples = collect_samples(prepared);
    check_label_balance(&samples)?;

    let corpus: Vec<&str> = prepared
        .iter()
        .flat_map(|r| r.sentences.iter().map(|s| s.text.as_str()))
        .collect();
    let vocab = build_vocab(&corpus)?;
    let params = init_params(&config.encoder, vocab.len(), config.seed)?;

    // Frozen encoder: compute every pair embedding once.
    let mut review_cache: HashMap<String, Vec<f64>> = HashMap::new();
    let mut pairs: Vec<Vec<f64>> = Vec::with_capacity(samples.len());
    for sample in &samples {
        let mut pair = encode_pair_cached(
            &mut review_cache,
            &sample.review_repr,
            &vocab,
            &params,
            &config.encoder,
        )?
        .clone();
        let sent =
            crate::encoder::encode(&sample.sentence, &vocab, &params, None, &config.encoder)?;
        pair.extend_from_slice(&sent.values);
        pairs.push(pair);
    }

    let compressor = fit_compressor(&pairs, config.n_clusters, config.seed)?;
    let features: Vec<Vec<f64>> = pairs
        .iter()
        .map(|p| compress(p, &compressor))
        .collect::<Result<_>>()?;
    let labels: Vec<f64> = samples.iter().map(|s| s.label).collect();

    let mut bn = BatchNormState::new(config.n_clusters);
    let mut head = LinearHead::zeros(config.n_clusters);

    let steps_per_epoch = epoch_batches(&(0..samples.len()).collect::<Vec<_>>(), config.batch).len();
    let total_steps = (steps_per_epoch * config.epochs).max(1);
    let schedule = OneCycleSchedule::new(config.lr, total_steps);
    let adamw = AdamwConfig {
        weight_decay: config.weight_decay,
        ..AdamwConfig::default()
    };
    let mut st_w = ParamState::new(config.n_clusters);
    let mut st_b = ParamState::new(1);
    let mut st_gamma = ParamState::new(config.n_clusters);
    let mut st_beta = ParamState::new(config.n_clusters);

    let mut trace = Vec::new();
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        let mut perm: Vec<usize> = (0..samples.len()).collect();
        rng_derive(config.seed, &format!("shuffle/head/{epoch}")).shuffle(&mut perm);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in epoch_batches(&perm, config.batch) {
            let batch_features: Vec<Vec<f64>> =
                batch.iter().map(|&i| features[i].clone()).collect();
            let batch_labels: Vec<f64> = batch.iter().map(|&i| labels[i]).collect();
            let mut mask_stream = rng_derive(config.seed, &format!("dropout/head/{step}"));
            let grads = head_batch_grads(
                &batch_features,
                &batch_labels,
                &mut bn,
                &head,
                config.dropout,
                &mut mask_stream,
            )?;
            let lr_t = onecycle_lr(step, &schedule)?;
            adamw_step(&mut head.w, &grads.w, &mut st_w, step + 1, lr_t, &adamw, true);
            let mut b_slice = [head.b];
            adamw_step(&mut b_slice, &[grads.b], &mut st_b, step + 1, lr_t, &adamw, false);
            head.b = b_slice[0];
            adamw_step(&mut bn.gamma, &grads.gamma, &mut st_gamma, step + 1, lr_t, &adamw, false);
            adamw_step(&mut bn.beta, &grads.beta, &mut st_beta, step + 1, lr_t, &adamw, false);

            trace.push(TraceRow {
                kind: "step",
                phase: "head",
                epoch,
                step,
                loss: grads.loss,
                accuracy: None,
            });
            epoch_loss += grads.loss;
            batches += 1;
            step += 1;
        }
        let accuracy = eval_accuracy_on_features(&features, &labels, &bn, &head)?;
        trace.push(TraceRow {
            kind: "epoch",
            phase: "head",
            epoch,
            step,
            loss: epoch_loss / batches.max(1) as f64,
            accuracy: Some(accuracy),
        });
    }

    let checkpoint = Checkpoint {
        format_tag: FORMAT_TAG.to_string(),
        master_seed: config.seed,
        config: config.clone(),
        vocabulary: vocab,
        params,
        adapters: None,
        compressor,
        batchnorm: bn,
        head,
    };
    Ok(TrainOutcome { checkpoint, trace })
}

struct LoraTensors<'a> {
    head: &'a mut LinearHead,
    bn: &'a mut BatchNormState,
    adapters: &'a mut LoraStack,
}

struct LoraOptim {
    st_w: ParamState,
    st_b: ParamState,
    st_gamma: ParamState,
    st_beta: ParamState,
    st_adapters: Vec<[ParamState; 4]>,
}

impl LoraOptim {
    fn new(n_features: usize, adapters: &LoraStack) -> Self {
        Self {
            st_w: ParamState::new(n_features),
            st_b: ParamState::new(1),
            st_gamma: ParamState::new(n_features),
            st_beta: ParamState::new(n_features),
            st_adapters: adapters
                .layers
                .iter()
                .map(|l| {
                    [
                        ParamState::new(l.w_in.a_down.data().len()),
                        ParamState::new(l.w_in.b_up.data().len()),
                        ParamState::new(l.w_out.a_down.data().len()),
                        ParamState::new(l.w_out.b_up.data().len()),
                    ]
                })
                .collect(),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn apply_lora_updates(
    tensors: &mut LoraTensors,
    head_grads: &HeadGrads,
    adapter_grads: &AdapterGrads,
    optim: &mut LoraOptim,
    step: usize,
    lr_t: f64,
    adamw: &AdamwConfig,
) {
    adamw_step(&mut tensors.head.w, &head_grads.w, &mut optim.st_w, step + 1, lr_t, adamw, true);
    let mut b_slice = [tensors.head.b];
    adamw_step(&mut b_slice, &[head_grads.b], &mut optim.st_b, step + 1, lr_t, adamw, false);
    tensors.head.b = b_slice[0];
    adamw_step(&mut tensors.bn.gamma, &head_grads.gamma, &mut optim.st_gamma, step + 1, lr_t, adamw, false);
    adamw_step(&mut tensors.bn.beta, &head_grads.beta, &mut optim.st_beta, step + 1, lr_t, adamw, false);
    for (layer_idx, (layer, grads)) in tensors
        .adapters
        .layers
        .iter_mut()
        .zip(&adapter_grads.layers)
        .enumerate()
    {
        let st = &mut optim.st_adapters[layer_idx];
        adamw_step(layer.w_in.a_down.data_mut(), grads.w_in_a.data(), &mut st[0], step + 1, lr_t, adamw, true);
        adamw_step(layer.w_in.b_up.data_mut(), grads.w_in_b.data(), &mut st[1], step + 1, lr_t, adamw, true);
        adamw_step(layer.w_out.a_down.data_mut(), grads.w_out_a.data(), &mut st[2], step + 1, lr_t, adamw, true);
        adamw_step(layer.w_out.b_up.data_mut(), grads.w_out_b.data(), &mut st[3], step + 1, lr_t, adamw, true);
    }
}

fn eval_accuracy_end_to_end(
    samples: &[TrainSample],
    vocab: &Vocabulary,
    params: &MambaParams,
    adapters: &LoraStack,
    compressor: &PoincareCompressor,
    bn: &BatchNormState,
    head: &LinearHead,
    config: &EncoderConfig,
) -> Result<f64> {
    let mut review_cache: HashMap<String, Vec<f64>> = HashMap::new();
    let mut correct = 0usize;
    for sample in samples {
        if !review_cache.contains_key(&sample.review_repr) {
            let e = crate::encoder::encode(
                &sample.review_repr,
                vocab,
                params,
                Some(adapters),
                config,
            )?;
            review_cache.insert(sample.review_repr.clone(), e.values);
        }
        let mut pair = review_cache[&sample.review_repr].clone();
        let sent = crate::encoder::encode(&sample.sentence, vocab, params, Some(adapters), config)?;
        pair.extend_from_slice(&sent.values);
        let f = compress(&pair, compressor)?;
        let normed = bn.forward_eval(&f)?;
        let p = sigmoid(linear_forward(&normed, head)?);
        let predicted = if p >= 0.5 { 1.0 } else { 0.0 };
        if predicted == sample.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Head training followed by LoRA fine-tuning: adapters attach with a zero
/// up-factor (so step 0 reproduces the head-only model exactly), then
/// gradients flow head -> batchnorm -> dropout -> compression -> encoder
/// into the adapter factors and head parameters. Centroids, scaler, and
/// base encoder weights stay frozen.
pub fn train_lora(prepared: &[PreparedReview], config: &RunConfig) -> Result<TrainOutcome> {
    let head_outcome = train_head(prepared, config)?;
    let mut checkpoint = head_outcome.checkpoint;
    let mut trace = head_outcome.trace;

    let mut adapters = init_adapters(
        &config.encoder,
        config.lora.rank,
        config.lora.alpha,
        config.lora.dropout,
        config.seed,
    );
    let lora_epochs = config.lora_epochs.unwrap_or(config.epochs);
    let samples = collect_samples(prepared);
    let labels: Vec<f64> = samples.iter().map(|s| s.label).collect();

    if lora_epochs > 0 {
        let mode = BackwardMode::Chunked(config.encoder.backward_chunk);
        let steps_per_epoch =
            epoch_batches(&(0..samples.len()).collect::<Vec<_>>(), config.batch).len();
        let total_steps = (steps_per_epoch * lora_epochs).max(1);
        let schedule = OneCycleSchedule::new(config.lr, total_steps);
        let adamw = AdamwConfig {
            weight_decay: config.weight_decay,
            ..AdamwConfig::default()
        };
        let mut optim = LoraOptim::new(config.n_clusters, &adapters);
        let mut step = 0usize;

        for epoch in 0..lora_epochs {
            let mut perm: Vec<usize> = (0..samples.len()).collect();
            rng_derive(config.seed, &format!("shuffle/lora/{epoch}")).shuffle(&mut perm);
            let mut epoch_loss = 0.0;
            let mut batches = 0usize;
            for batch in epoch_batches(&perm, config.batch) {
                let mut adapter_mask_stream =
                    rng_derive(config.seed, &format!("dropout/lora-adapter/{step}"));
                let mut head_mask_stream =
                    rng_derive(config.seed, &format!("dropout/lora-head/{step}"));

                // Forward every pair in training mode, keeping the traces.
                let mut traces = Vec::with_capacity(batch.len());
                let mut batch_features = Vec::with_capacity(batch.len());
                for &i in &batch {
                    let sample = &samples[i];
                    let len_r = tokenize(&sample.review_repr, &checkpoint.vocabulary, config.encoder.max_len).len();
                    let noise_r = TrainNoise::draw(
                        &config.encoder,
                        len_r,
                        config.lora.dropout,
                        &mut adapter_mask_stream,
                    );
                    let trace_r = encode_forward_train(
                        &sample.review_repr,
                        &checkpoint.vocabulary,
                        &checkpoint.params,
                        Some(&adapters),
                        &config.encoder,
                        Some(&noise_r),
                        mode,
                    )?;
                    let len_s = tokenize(&sample.sentence, &checkpoint.vocabulary, config.encoder.max_len).len();
                    let noise_s = TrainNoise::draw(
                        &config.encoder,
                        len_s,
                        config.lora.dropout,
                        &mut adapter_mask_stream,
                    );
                    let trace_s = encode_forward_train(
                        &sample.sentence,
                        &checkpoint.vocabulary,
                        &checkpoint.params,
                        Some(&adapters),
                        &config.encoder,
                        Some(&noise_s),
                        mode,
                    )?;
                    let mut pair = trace_r.pooled.clone();
                    pair.extend_from_slice(&trace_s.pooled);
                    batch_features.push(compress(&pair, &checkpoint.compressor)?);
                    traces.push((trace_r, noise_r, trace_s, noise_s, pair));
                }

                let batch_labels: Vec<f64> = batch.iter().map(|&i| labels[i]).collect();
                let head_grads = head_batch_grads(
                    &batch_features,
                    &batch_labels,
                    &mut checkpoint.batchnorm,
                    &checkpoint.head,
                    config.dropout,
                    &mut head_mask_stream,
                )?;

                let mut adapter_grads = AdapterGrads::zeros_like(&adapters);
                let d_model = config.encoder.d_model;
                for (sample_idx, (trace_r, noise_r, trace_s, noise_s, pair)) in
                    traces.iter().enumerate()
                {
                    let g_pair = compress_backward(
                        pair,
                        &checkpoint.compressor,
                        &head_grads.features[sample_idx],
                    )?;
                    encode_backward_trace(
                        trace_r,
                        &g_pair[..d_model],
                        &checkpoint.params,
                        &adapters,
                        &config.encoder,
                        Some(noise_r),
                        mode,
                        &mut adapter_grads,
                    )?;
                    encode_backward_trace(
                        trace_s,
                        &g_pair[d_model..],
                        &checkpoint.params,
                        &adapters,
                        &config.encoder,
                        Some(noise_s),
                        mode,
                        &mut adapter_grads,
                    )?;
                }

                let lr_t = onecycle_lr(step, &schedule)?;
                let mut tensors = LoraTensors {
                    head: &mut checkpoint.head,
                    bn: &mut checkpoint.batchnorm,
                    adapters: &mut adapters,
                };
                apply_lora_updates(
                    &mut tensors,
                    &head_grads,
                    &adapter_grads,
                    &mut optim,
                    step,
                    lr_t,
                    &adamw,
                );

                trace.push(TraceRow {
                    kind: "step",
                    phase: "lora",
                    epoch,
                    step,
                    loss: head_grads.loss,
                    accuracy: None,
                });
                epoch_loss += head_grads.loss;
                batches += 1;
                step += 1;
            }
            let accuracy = eval_accuracy_end_to_end(
                &samples,
                &checkpoint.vocabulary,
                &checkpoint.params,
                &adapters,
                &checkpoint.compressor,
                &checkpoint.batchnorm,
                &checkpoint.head,
                &config.encoder,
            )?;
            trace.push(TraceRow {
                kind: "epoch",
                phase: "lora",
                epoch,
                step,
                loss: epoch_loss / batches.max(1) as f64,
                accuracy: Some(accuracy),
            });
        }
    }

    checkpoint.adapters = Some(adapters);
    Ok(TrainOutcome { checkpoint, trace })
}
