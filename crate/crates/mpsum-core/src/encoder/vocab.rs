//! Whitespace word vocabulary built from the preprocessed training corpus.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Token ids are dense in [0, len); 0 and 1 are reserved for pad/unk.
/// Serialized as the token list in id order so checkpoints stay stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    fn with_reserved() -> Self {
        let tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, ids }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, ids }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

/// Assign ids by first occurrence across the already-preprocessed corpus.
pub fn build_vocab<S: AsRef<str>>(training_texts: &[S]) -> Result<Vocabulary> {
    let mut vocab = Vocabulary::with_reserved();
    let mut any_token = false;
    for text in training_texts {
        for token in text.as_ref().split_whitespace() {
            any_token = true;
            if !vocab.ids.contains_key(token) {
                vocab.ids.insert(token.to_string(), vocab.tokens.len());
                vocab.tokens.push(token.to_string());
            }
        }
    }
    if training_texts.is_empty() || !any_token {
        return Err(Error::EmptyCorpus);
    }
    Ok(vocab)
}

/// Map text to token ids; unknown tokens become unk, tails past `max_len`
/// are truncated, and no padding is stored.
pub fn tokenize(text: &str, vocab: &Vocabulary, max_len: usize) -> Vec<usize> {
    text.split_whitespace()
        .take(max_len)
        .map(|t| vocab.id(t))
        .collect()
}
