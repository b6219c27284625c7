//! JSON Lines dataset ingestion and the prepared (annotated) format.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::LabeledSentence;

/// One raw input review: `{"review_id": ..., "text": ..., "summary"?: ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

/// Load a JSONL review file, preserving order. Duplicate ids are an error.
pub fn load_reviews(path: &Path) -> Result<Vec<Review>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut reviews = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let review: Review = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if !seen.insert(review.review_id.clone()) {
            return Err(Error::DuplicateId(review.review_id));
        }
        reviews.push(review);
    }
    Ok(reviews)
}

/// One line of the prepared dataset: the annotated sentences of a review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedReview {
    pub review_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    pub sentences: Vec<PreparedSentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedSentence {
    pub raw: String,
    pub text: String,
    /// 1 = relevant, 0 = irrelevant, absent = unlabeled (no gold summary).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_score: Option<f64>,
}

impl PreparedReview {
    /// Space-joined preprocessed sentences; the review-level text every
    /// encoder call uses.
    pub fn review_repr_text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl From<&LabeledSentence> for PreparedSentence {
    fn from(s: &LabeledSentence) -> Self {
        Self {
            raw: s.raw.clone(),
            text: s.text.clone(),
            label: s.label,
            rouge_score: s.rouge_score,
            sim_score: s.sim_score,
        }
    }
}

pub fn save_prepared(path: &Path, prepared: &[PreparedReview]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    for review in prepared {
        serde_json::to_writer(&mut file, review)?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_prepared(path: &Path) -> Result<Vec<PreparedReview>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let review: PreparedReview = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if !seen.insert(review.review_id.clone()) {
            return Err(Error::DuplicateId(review.review_id));
        }
        out.push(review);
    }
    Ok(out)
}
