//! Relevance auto-annotation: ROUGE of each sentence against the gold
//! summary, with an optional semantic-similarity disjunct against the
//! review representation.

use crate::encoder::{cosine_similarity, encode, EncoderConfig, MambaParams, Vocabulary};
use crate::error::{Error, Result};
use crate::rouge::{rouge_l, rouge_n, rouge_tokens};
use crate::text::{preprocess, split_sentences, Review};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSentence {
    pub raw: String,
    pub text: String,
    pub label: Option<u8>,
    pub rouge_score: Option<f64>,
    pub sim_score: Option<f64>,
}

/// Encoder handles for the similarity disjunct.
pub struct SimContext<'a> {
    pub vocab: &'a Vocabulary,
    pub params: &'a MambaParams,
    pub config: &'a EncoderConfig,
}

/// Split, preprocess, and label the sentences of one review.
///
/// label = 1 iff mean(R1, R2, RL F1 vs gold) >= tau_rouge, or (when
/// `use_sim`) cosine(H_s, H_r) >= tau_sim. Reviews without a gold summary
/// come back unlabeled; an explicitly empty gold summary is an error.
pub fn annotate(
    review: &Review,
    sim: Option<&SimContext>,
    tau_rouge: f64,
    tau_sim: f64,
    use_sim: bool,
) -> Result<Vec<LabeledSentence>> {
    if use_sim && sim.is_none() {
        return Err(Error::InvalidConfig(
            "similarity annotation requires an encoder context".into(),
        ));
    }
    let raw_sentences = split_sentences(&review.text);
    let texts: Vec<String> = raw_sentences.iter().map(|s| preprocess(s)).collect();

    let gold_tokens = match &review.summary {
        None => {
            return Ok(raw_sentences
                .into_iter()
                .zip(texts)
                .map(|(raw, text)| LabeledSentence {
                    raw,
                    text,
                    label: None,
                    rouge_score: None,
                    sim_score: None,
                })
                .collect())
        }
        Some(summary) => {
            let tokens = rouge_tokens(summary);
            if tokens.is_empty() {
                return Err(Error::NoGold(review.review_id.clone()));
            }
            tokens
        }
    };

    let review_embedding = if use_sim {
        let ctx = sim.unwrap();
        let repr = texts.join(" ");
        Some(encode(&repr, ctx.vocab, ctx.params, None, ctx.config)?.values)
    } else {
        None
    };

    let mut out = Vec::with_capacity(raw_sentences.len());
    for (raw, text) in raw_sentences.into_iter().zip(texts) {
        let cand = rouge_tokens(&text);
        let r1 = rouge_n(&cand, &gold_tokens, 1).f1;
        let r2 = rouge_n(&cand, &gold_tokens, 2).f1;
        let rl = rouge_l(&cand, &gold_tokens).f1;
        let rouge_score = (r1 + r2 + rl) / 3.0;

        let sim_score = match (&review_embedding, sim) {
            (Some(h_r), Some(ctx)) => {
                let h_s = encode(&text, ctx.vocab, ctx.params, None, ctx.config)?.values;
                Some(cosine_similarity(&h_s, h_r))
            }
            _ => None,
        };

        let relevant = rouge_score >= tau_rouge
            || (use_sim && sim_score.is_some_and(|s| s >= tau_sim));
        out.push(LabeledSentence {
            raw,
            text,
            label: Some(u8::from(relevant)),
            rouge_score: Some(rouge_score),
            sim_score,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn review(text: &str, summary: Option<&str>) -> Review {
        Review {
            review_id: "r".into(),
            text: text.into(),
            summary: summary.map(str::to_string),
        }
    }

    #[test]
    fn sentence_equal_to_gold_is_relevant() {
        let r = review("Great tasting coffee. The box was dented.", Some("great tasting coffee"));
        let labeled = annotate(&r, None, 0.15, 0.8, false).unwrap();
        assert_eq!(labeled[0].label, Some(1));
        assert!((labeled[0].rouge_score.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_sentence_is_irrelevant() {
        let r = review("Great tasting coffee. The box was dented.", Some("great tasting coffee"));
        let labeled = annotate(&r, None, 0.15, 0.8, false).unwrap();
        assert_eq!(labeled[1].label, Some(0));
        assert_eq!(labeled[1].rouge_score, Some(0.0));
    }

    #[test]
    fn published_example_sentence_is_relevant_at_default_tau() {
        let r = review(
            "my first cup began with a fairly pronounced chemical taste. \
             I do not normally drink flavored coffee.",
            Some("fairly strong chemical taste"),
        );
        let labeled = annotate(&r, None, 0.15, 0.8, false).unwrap();
        assert_eq!(labeled[0].label, Some(1), "score {:?}", labeled[0].rouge_score);
        assert!(labeled[0].rouge_score.unwrap() >= 0.15);
    }

    #[test]
    fn missing_summary_leaves_sentences_unlabeled() {
        let r = review("Anything at all. More text here.", None);
        let labeled = annotate(&r, None, 0.15, 0.8, false).unwrap();
        assert_eq!(labeled.len(), 2);
        assert!(labeled.iter().all(|s| s.label.is_none()));
        assert!(labeled.iter().all(|s| s.rouge_score.is_none()));
    }

    #[test]
    fn empty_gold_summary_is_an_error() {
        let r = review("Some text.", Some("  !! 123 "));
        assert!(matches!(
            annotate(&r, None, 0.15, 0.8, false),
            Err(Error::NoGold(_))
        ));
    }

    #[test]
    fn labeled_text_is_the_preprocessed_sentence() {
        // '!' splits only when followed by whitespace, so "NOW!!" ends the
        // first sentence; "123." preprocesses to an empty text.
        let r = review("Visit https://x.com NOW!! 123. plain tail", Some("visit now"));
        let labeled = annotate(&r, None, 0.15, 0.8, false).unwrap();
        assert_eq!(labeled[0].raw, "Visit https://x.com NOW!!");
        assert_eq!(labeled[0].text, "visit now");
        assert_eq!(labeled[1].raw, "123.");
        assert_eq!(labeled[1].text, "");
        assert_eq!(labeled[1].label, Some(0));
        assert_eq!(labeled[2].text, "plain tail");
    }

    #[test]
    fn every_labeled_text_is_the_preprocess_of_its_raw() {
        let r = review(
            "First THING here!! Second thing, with 42 numbers. Visit www.shop.io today; done",
            Some("first thing"),
        );
        let labeled = annotate(&r, None, 0.15, 0.8, false).unwrap();
        assert!(labeled.len() >= 3);
        for s in &labeled {
            assert_eq!(s.text, preprocess(&s.raw));
        }
    }

    #[test]
    fn use_sim_without_context_is_rejected() {
        let r = review("One sentence.", Some("one"));
        assert!(matches!(
            annotate(&r, None, 0.15, 0.8, true),
            Err(Error::InvalidConfig(_))
        ));
    }
}
