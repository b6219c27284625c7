//! ROUGE-1 / ROUGE-2 / ROUGE-L over preprocessed whitespace tokens.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::preprocess;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(overlap: usize, cand_total: usize, ref_total: usize) -> Self {
        let precision = if cand_total > 0 {
            overlap as f64 / cand_total as f64
        } else {
            0.0
        };
        let recall = if ref_total > 0 {
            overlap as f64 / ref_total as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

/// Tokenization shared by annotation and evaluation: the pipeline
/// preprocess followed by a whitespace split.
pub fn rouge_tokens(text: &str) -> Vec<String> {
    preprocess(text)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Clipped n-gram multiset overlap.
pub fn rouge_n(candidate: &[String], reference: &[String], n: usize) -> RougeScore {
    assert!(n >= 1, "rouge_n requires n >= 1");
    let cand_grams = ngram_counts(candidate, n);
    let ref_grams = ngram_counts(reference, n);
    let mut overlap = 0usize;
    for (gram, count) in &cand_grams {
        if let Some(rc) = ref_grams.get(gram) {
            overlap += (*count).min(*rc);
        }
    }
    let cand_total = candidate.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    RougeScore::from_counts(overlap, cand_total, ref_total)
}

fn ngram_counts(tokens: &[String], n: usize) -> std::collections::HashMap<Vec<&str>, usize> {
    let mut counts = std::collections::HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            let gram: Vec<&str> = w.iter().map(String::as_str).collect();
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Longest common subsequence length via the classic DP table.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            cur[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(candidate: &[String], reference: &[String]) -> RougeScore {
    let lcs = lcs_len(candidate, reference);
    RougeScore::from_counts(lcs, candidate.len(), reference.len())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorpusRouge {
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
}

/// Unweighted mean of per-pair F1 for each metric.
pub fn corpus_rouge(pairs: &[(String, String)]) -> Result<CorpusRouge> {
    if pairs.is_empty() {
        return Err(Error::DegenerateInput(
            "corpus ROUGE needs at least one (generated, gold) pair".into(),
        ));
    }
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    let mut rl = 0.0;
    for (generated, gold) in pairs {
        let cand = rouge_tokens(generated);
        let refr = rouge_tokens(gold);
        r1 += rouge_n(&cand, &refr, 1).f1;
        r2 += rouge_n(&cand, &refr, 2).f1;
        rl += rouge_l(&cand, &refr).f1;
    }
    let n = pairs.len() as f64;
    Ok(CorpusRouge {
        rouge1: r1 / n,
        rouge2: r2 / n,
        rouge_l: rl / n,
    })
}
