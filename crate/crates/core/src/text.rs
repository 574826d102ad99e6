//! Deterministic, corpus-independent tokenization.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Lowercase the input, split punctuation characters into their own tokens,
/// and split on whitespace.
///
/// `"I like Rock!"` becomes `["i", "like", "rock", "!"]`. The mapping depends
/// only on the input string, never on a corpus, so identical text always
/// yields identical tokens.
pub fn tokenize(input: &str) -> Vec<String> {
    let lowered = input.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in lowered.chars() {
        if ch.is_alphanumeric() {
            current.push(ch);
        } else if ch.is_whitespace() {
            flush(&mut tokens, &mut current);
        } else {
            flush(&mut tokens, &mut current);
            tokens.push(ch.to_string());
        }
    }
    flush(&mut tokens, &mut current);
    tokens
}

fn flush(tokens: &mut Vec<String>, current: &mut String) {
    if !current.is_empty() {
        tokens.push(core::mem::take(current));
    }
}

/// Inverse of [`tokenize`] for canonical tokens: join with single spaces.
/// Round-trips through `tokenize` for any token sequence `tokenize` produced.
pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}
