//! Text cleanup applied before tokenization: lowercase, drop URL tokens,
//! strip digits and punctuation, collapse whitespace.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessFlags {
    pub lowercase: bool,
    pub strip_urls: bool,
    pub strip_digits: bool,
    pub strip_punctuation: bool,
}

impl Default for PreprocessFlags {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_urls: true,
            strip_digits: true,
            strip_punctuation: true,
        }
    }
}

fn is_url_token(token: &str) -> bool {
    token.starts_with("http://") || token.starts_with("https://") || token.starts_with("www.")
}

pub fn preprocess_with(raw: &str, flags: &PreprocessFlags) -> String {
    let lowered = if flags.lowercase {
        raw.to_lowercase()
    } else {
        raw.to_string()
    };

    let mut kept = String::with_capacity(lowered.len());
    for token in lowered.split_whitespace() {
        if flags.strip_urls && is_url_token(token) {
            continue;
        }
        if !kept.is_empty() {
            kept.push(' ');
        }
        kept.push_str(token);
    }

    let mut cleaned = String::with_capacity(kept.len());
    for ch in kept.chars() {
        if flags.strip_digits && ch.is_ascii_digit() {
            continue;
        }
        if flags.strip_punctuation && ch.is_ascii_punctuation() {
            continue;
        }
        cleaned.push(ch);
    }

    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn preprocess(raw: &str) -> String {
    preprocess_with(raw, &PreprocessFlags::default())
}
