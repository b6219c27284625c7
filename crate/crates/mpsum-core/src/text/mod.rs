//! Dataset ingestion, preprocessing, relevance annotation, summarization,
//! and the pluggable paraphrase interface.

mod annotate;
mod dataset;
mod paraphrase;
mod preprocess;
mod sentences;
mod summarize;

pub use annotate::{annotate, LabeledSentence, SimContext};
pub use dataset::{
    load_prepared, load_reviews, save_prepared, PreparedReview, PreparedSentence, Review,
};
pub use paraphrase::{remote_paraphrase, Paraphraser};
pub use preprocess::{preprocess, preprocess_with, PreprocessFlags};
pub use sentences::split_sentences;
pub use summarize::{summarize, summarize_prepared, SummaryResult};
