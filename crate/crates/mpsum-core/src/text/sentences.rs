//! Rule-based sentence splitting. Runs on raw text, before preprocessing,
//! because punctuation removal would destroy the boundaries.

const TERMINATORS: [char; 4] = ['.', '!', '?', ';'];

/// Split on '.', '!', '?', ';' when followed by whitespace or end-of-text.
/// Delimiters stay attached to their sentence; blank fragments are dropped.
pub fn split_sentences(raw_text: &str) -> Vec<String> {
    let chars: Vec<char> = raw_text.chars().collect();
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        current.push(ch);
        if TERMINATORS.contains(&ch) {
            let at_end = i + 1 == chars.len();
            let before_space = !at_end && chars[i + 1].is_whitespace();
            if at_end || before_space {
                push_trimmed(&mut sentences, &mut current);
            }
        }
        i += 1;
    }
    push_trimmed(&mut sentences, &mut current);
    sentences
}

fn push_trimmed(sentences: &mut Vec<String>, current: &mut String) {
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        sentences.push(trimmed.to_string());
    }
    current.clear();
}
