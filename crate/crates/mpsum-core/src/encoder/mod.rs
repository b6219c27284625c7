//! Selective state-space text encoder: vocabulary, zero-order-hold
//! discretization, linear-recurrence scans (sequential and parallel),
//! HiPPO-derived initialization, mean pooling, and a reverse-mode backward
//! pass that recomputes hidden states in chunks.

mod backward;
mod forward;
mod hippo;
mod params;
mod scan;
mod vocab;

pub use backward::{
    encode_backward_trace, encode_batch_backward, encode_forward_train, AdapterGrads,
    BackwardMode, EncodeTrace, LayerMasks, TrainNoise,
};
pub use forward::{cosine_similarity, encode, encode_pair, TextEmbedding};
pub use hippo::hippo_legs_matrix;
pub use params::{init_params, EncoderConfig, LayerParams, MambaParams, Pooling, ScanMode};
pub use scan::{
    discretize, discretize_grads, discretize_with_threshold, scan_combine,
    selective_scan_parallel, selective_scan_seq, ScanPair, DELTA_TAYLOR_THRESHOLD, SCAN_IDENTITY,
};
pub use vocab::{build_vocab, tokenize, Vocabulary, PAD_ID, UNK_ID};
