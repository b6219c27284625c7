//! Versioned checkpoint: one JSON document holding the vocabulary, encoder
//! weights, optional adapters, compressor, head, and the run config.
//! Save -> load -> save is byte-identical; unknown format tags are
//! rejected outright.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{linear_forward, BatchNormState, LinearHead};
use crate::compression::{compress, PoincareCompressor};
use crate::config::RunConfig;
use crate::encoder::{encode_pair, MambaParams, Vocabulary};
use crate::error::{Error, Result};
use crate::lora::LoraStack;
use crate::numerics::sigmoid;

pub const FORMAT_TAG: &str = "mpsum_checkpoint_v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_tag: String,
    pub master_seed: u64,
    pub config: RunConfig,
    pub vocabulary: Vocabulary,
    pub params: MambaParams,
    pub adapters: Option<LoraStack>,
    pub compressor: PoincareCompressor,
    pub batchnorm: BatchNormState,
    pub head: LinearHead,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_slice(bytes)?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    fn validate(&self) -> Result<()> {
        if self.format_tag != FORMAT_TAG {
            return Err(Error::BadCheckpoint(format!(
                "unknown format tag {:?}, expected {FORMAT_TAG:?}",
                self.format_tag
            )));
        }
        if !self.params.all_finite() {
            return Err(Error::BadCheckpoint("non-finite encoder weights".into()));
        }
        if !self.params.a_strictly_negative() {
            return Err(Error::BadCheckpoint(
                "state matrix A has nonnegative entries".into(),
            ));
        }
        if self.batchnorm.running_var.iter().any(|&v| v < 0.0) {
            return Err(Error::BadCheckpoint("negative running variance".into()));
        }
        Ok(())
    }

    /// Relevance probability for one (review, sentence) pair of
    /// preprocessed texts: encode -> compress -> batchnorm(eval) ->
    /// linear -> sigmoid.
    pub fn score_sentence(&self, review_repr: &str, sentence: &str) -> Result<f64> {
        let pair = encode_pair(
            review_repr,
            sentence,
            &self.vocabulary,
            &self.params,
            self.adapters.as_ref(),
            &self.config.encoder,
        )?;
        let features = compress(&pair.values, &self.compressor)?;
        let normed = self.batchnorm.forward_eval(&features)?;
        let logit = linear_forward(&normed, &self.head)?;
        Ok(sigmoid(logit))
    }
}
