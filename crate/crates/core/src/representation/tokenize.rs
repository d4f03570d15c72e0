use std::collections::HashMap;

/// Lowercased maximal runs of alphanumeric characters with at least
/// `min_len` characters.
pub fn tokenize_with(text: &str, min_len: usize) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut chars = 0usize;
    for c in lower.chars() {
        if c.is_alphanumeric() {
            current.push(c);
            chars += 1;
        } else {
            if chars >= min_len {
                tokens.push(std::mem::take(&mut current));
            } else {
                current.clear();
            }
            chars = 0;
        }
    }
    if chars >= min_len {
        tokens.push(current);
    }
    tokens
}

/// Tokens of at least two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, 2)
}

/// All n-grams for `n` in `min_n..=max_n`, tokens joined by a single space.
pub fn ngrams(tokens: &[String], min_n: usize, max_n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in min_n.max(1)..=max_n {
        if n > tokens.len() {
            break;
        }
        if n == 1 {
            out.extend(tokens.iter().cloned());
        } else {
            out.extend(tokens.windows(n).map(|w| w.join(" ")));
        }
    }
    out
}

pub fn bigrams(tokens: &[String]) -> Vec<String> {
    ngrams(tokens, 2, 2)
}

pub fn term_counts(terms: impl IntoIterator<Item = String>) -> HashMap<String, u32> {
    let mut counts = HashMap::new();
    for t in terms {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}
