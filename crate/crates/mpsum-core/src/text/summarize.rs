//! End-to-end summarization: score every sentence against its review,
//! select by threshold (or top-k), paraphrase, concatenate.

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::text::{preprocess, split_sentences, Paraphraser, PreparedReview, Review};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryResult {
    /// Every preprocessed sentence of the review, in order.
    pub sentences: Vec<String>,
    /// Indices into `sentences`, in review order.
    pub selected_indices: Vec<usize>,
    /// Preprocessed selected sentences, review order preserved.
    pub selected: Vec<String>,
    pub paraphrased: Vec<String>,
    /// Space-joined concatenation of the paraphrased sentences.
    pub final_summary: String,
    /// Relevance probability per sentence (all sentences, review order).
    pub scores: Vec<f64>,
    /// Set when the threshold selected nothing (and no top-k was given).
    pub none_selected: bool,
}

fn score_all(texts: &[String], checkpoint: &Checkpoint, jobs: usize) -> Result<Vec<f64>> {
    let review_repr = texts.join(" ");
    if jobs <= 1 || texts.len() < 2 {
        return texts
            .iter()
            .map(|t| checkpoint.score_sentence(&review_repr, t))
            .collect();
    }
    let workers = jobs.min(texts.len());
    let chunk = texts.len().div_ceil(workers);
    let results: Vec<Result<Vec<f64>>> = std::thread::scope(|scope| {
        let review_repr = &review_repr;
        let handles: Vec<_> = texts
            .chunks(chunk)
            .map(|chunk_texts| {
                scope.spawn(move || {
                    chunk_texts
                        .iter()
                        .map(|t| checkpoint.score_sentence(review_repr, t))
                        .collect::<Result<Vec<f64>>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut scores = Vec::with_capacity(texts.len());
    for r in results {
        scores.extend(r?);
    }
    Ok(scores)
}

fn select_indices(scores: &[f64], threshold: f64, top_k: Option<usize>) -> Vec<usize> {
    match top_k {
        Some(k) => {
            let mut order: Vec<usize> = (0..scores.len()).collect();
            // highest probability first; ties go to the earliest sentence
            order.sort_by(|&a, &b| {
                scores[b]
                    .partial_cmp(&scores[a])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut picked: Vec<usize> = order.into_iter().take(k).collect();
            picked.sort_unstable();
            picked
        }
        None => (0..scores.len())
            .filter(|&i| scores[i] >= threshold)
            .collect(),
    }
}

fn summarize_texts(
    texts: Vec<String>,
    checkpoint: &Checkpoint,
    paraphraser: &Paraphraser,
    threshold: f64,
    top_k: Option<usize>,
    jobs: usize,
) -> Result<SummaryResult> {
    if texts.is_empty() {
        return Err(Error::EmptyReview);
    }
    let scores = score_all(&texts, checkpoint, jobs)?;
    let selected_indices = select_indices(&scores, threshold, top_k);
    let selected: Vec<String> = selected_indices.iter().map(|&i| texts[i].clone()).collect();
    let none_selected = selected.is_empty();
    let paraphrased = paraphraser.run(&selected)?;
    let final_summary = paraphrased.join(" ");
    Ok(SummaryResult {
        sentences: texts,
        selected_indices,
        selected,
        paraphrased,
        final_summary,
        scores,
        none_selected,
    })
}

/// Summarize a raw review: split BEFORE preprocessing, then score each
/// preprocessed sentence against the review representation.
pub fn summarize(
    review: &Review,
    checkpoint: &Checkpoint,
    paraphraser: &Paraphraser,
    threshold: f64,
    top_k: Option<usize>,
    jobs: usize,
) -> Result<SummaryResult> {
    let texts: Vec<String> = split_sentences(&review.text)
        .iter()
        .map(|s| preprocess(s))
        .collect();
    summarize_texts(texts, checkpoint, paraphraser, threshold, top_k, jobs)
}

/// Summarize an already-prepared review (sentences pre-split and
/// preprocessed).
pub fn summarize_prepared(
    prepared: &PreparedReview,
    checkpoint: &Checkpoint,
    paraphraser: &Paraphraser,
    threshold: f64,
    top_k: Option<usize>,
    jobs: usize,
) -> Result<SummaryResult> {
    let texts: Vec<String> = prepared.sentences.iter().map(|s| s.text.clone()).collect();
    summarize_texts(texts, checkpoint, paraphraser, threshold, top_k, jobs)
}
