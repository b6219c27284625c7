//! AdamW with decoupled decay, and the one-cycle learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamwConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamwConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.5,
        }
    }
}

/// First and second moments for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl ParamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One bias-corrected Adam step followed by decoupled decay
/// w <- w - lr_t * lambda * w. `step` is 1-based. Decay applies only when
/// `decay` is set (weights yes; batch-norm gamma/beta and biases no).
pub fn adamw_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut ParamState,
    step: usize,
    lr_t: f64,
    cfg: &AdamwConfig,
    decay: bool,
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..params.len() {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr_t * m_hat / (v_hat.sqrt() + cfg.eps);
        if decay {
            // Multiplicative form so a zero-gradient parameter follows the
            // (1 - lr * lambda) product exactly.
            params[i] *= 1.0 - lr_t * cfg.weight_decay;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneCycleSchedule {
    pub max_lr: f64,
    pub total_steps: usize,
    pub pct_start: f64,
    pub div_factor: f64,
    pub final_div_factor: f64,
}

impl OneCycleSchedule {
    pub fn new(max_lr: f64, total_steps: usize) -> Self {
        Self {
            max_lr,
            total_steps,
            pct_start: 0.3,
            div_factor: 25.0,
            final_div_factor: 1e4,
        }
    }
}

/// Cosine ramp from max_lr/div_factor up to max_lr over the first
/// pct_start of the run, then cosine anneal down to
/// max_lr/(div_factor * final_div_factor).
pub fn onecycle_lr(step: usize, schedule: &OneCycleSchedule) -> Result<f64> {
    if step > schedule.total_steps {
        return Err(Error::InvalidStep {
            step,
            total: schedule.total_steps,
        });
    }
    let initial = schedule.max_lr / schedule.div_factor;
    let final_lr = initial / schedule.final_div_factor;
    let peak = schedule.pct_start * schedule.total_steps as f64;
    let s = step as f64;
    let lr = if s <= peak && peak > 0.0 {
        let progress = s / peak;
        initial
            + (schedule.max_lr - initial) * 0.5 * (1.0 - (std::f64::consts::PI * progress).cos())
    } else {
        let span = schedule.total_steps as f64 - peak;
        let progress = if span > 0.0 { (s - peak) / span } else { 1.0 };
        final_lr
            + (schedule.max_lr - final_lr) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
    };
    Ok(lr)
}
