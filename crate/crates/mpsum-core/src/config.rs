//! Run configuration with validated ranges. Precedence is built-in
//! defaults < config file < command-line flags; the CLI applies the last
//! layer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::text::PreprocessFlags;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoraSettings {
    pub enabled: bool,
    pub rank: usize,
    pub alpha: f64,
    pub dropout: f64,
}

impl Default for LoraSettings {
    fn default() -> Self {
        Self {
            enabled: false,
            rank: 4,
            alpha: 32.0,
            dropout: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub n_clusters: usize,
    pub epochs: usize,
    /// Fine-tuning epochs for the LoRA phase; defaults to `epochs`.
    pub lora_epochs: Option<usize>,
    pub batch: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub lora: LoraSettings,
    pub tau_rouge: f64,
    pub tau_sim: f64,
    pub use_sim: bool,
    pub threshold: f64,
    pub top_k: Option<usize>,
    pub encoder: EncoderConfig,
    pub preprocess: PreprocessFlags,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_clusters: 8,
            epochs: 100,
            lora_epochs: None,
            batch: 32,
            lr: 2e-5,
            weight_decay: 0.5,
            dropout: 0.5,
            lora: LoraSettings::default(),
            tau_rouge: 0.15,
            tau_sim: 0.8,
            use_sim: false,
            threshold: 0.5,
            top_k: None,
            encoder: EncoderConfig::default(),
            preprocess: PreprocessFlags::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.tau_rouge) {
            return fail(format!("tau_rouge must be in [0, 1], got {}", self.tau_rouge));
        }
        if !(0.0..=1.0).contains(&self.tau_sim) {
            return fail(format!("tau_sim must be in [0, 1], got {}", self.tau_sim));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return fail(format!("threshold must be in [0, 1], got {}", self.threshold));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(0.0..1.0).contains(&self.lora.dropout) {
            return fail(format!(
                "lora dropout must be in [0, 1), got {}",
                self.lora.dropout
            ));
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if self.weight_decay < 0.0 || !self.weight_decay.is_finite() {
            return fail(format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            ));
        }
        if self.batch < 2 {
            return fail(format!("batch must be at least 2, got {}", self.batch));
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.n_clusters < 2 {
            return fail(format!("n_clusters must be at least 2, got {}", self.n_clusters));
        }
        if self.lora.rank == 0 {
            return fail("lora rank must be at least 1".into());
        }
        let e = &self.encoder;
        if e.d_model == 0 || e.expand == 0 || e.d_state == 0 || e.n_layers == 0 || e.max_len == 0 {
            return fail("encoder dimensions must all be positive".into());
        }
        Ok(())
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let config: RunConfig = toml::from_str(&raw)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Ok(config)
    }
}
