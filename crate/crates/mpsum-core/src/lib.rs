//! Extractive review summarization at desk scale.
//!
//! The pipeline classifies each sentence of a review as relevant or not:
//! a selective state-space encoder turns the review and the sentence into a
//! concatenated pair embedding, distances to spectral-cluster centroids in
//! the Poincare ball compress that embedding into a short feature vector,
//! and a batch-normalized linear head scores relevance. Selected sentences
//! are optionally paraphrased through an external service and the result is
//! evaluated with ROUGE.
//!
//! Everything is deterministic: all randomness flows from one master seed
//! through labeled substreams, so repeated runs produce byte-identical
//! checkpoints and reports.

pub mod checkpoint;
pub mod classifier;
pub mod compression;
pub mod config;
pub mod encoder;
pub mod error;
pub mod fixture;
pub mod lora;
pub mod numerics;
pub mod rouge;
pub mod selfcheck;
pub mod text;

pub use error::{Error, Result};
