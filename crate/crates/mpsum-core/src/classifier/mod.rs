//! Relevance head: batch normalization, dropout, a linear scorer with
//! binary cross-entropy, AdamW with a one-cycle schedule, and the two
//! training regimes (head-only and LoRA fine-tuning).

mod batchnorm;
mod dropout;
mod linear;
mod loss;
mod optim;
mod train;

pub use batchnorm::{BatchNormCache, BatchNormState};
pub use dropout::{apply_dropout_mask, dropout, draw_dropout_mask};
pub use linear::{linear_forward, LinearHead};
pub use loss::bce_loss;
pub use optim::{adamw_step, onecycle_lr, AdamwConfig, OneCycleSchedule, ParamState};
pub use train::{
    collect_samples, train_head, train_lora, write_trace_csv, TraceRow, TrainOutcome, TrainSample,
};

/// Train vs eval behavior for batch norm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
