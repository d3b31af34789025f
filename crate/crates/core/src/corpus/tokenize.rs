//! Tokenizers for code snippets and natural-language text.
//!
//! Both split on the same character classes: a maximal run of alphanumeric
//! characters (underscore included, so `get_loc` stays whole) is one token, every
//! other non-whitespace character is a token by itself, and whitespace is dropped.

#[inline]
pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn split_word_runs(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if is_word_char(c) {
            if run_start.is_none() {
                run_start = Some(i);
            }
            continue;
        }
        if let Some(start) = run_start.take() {
            tokens.push(text[start..i].to_string());
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if let Some(start) = run_start {
        tokens.push(text[start..].to_string());
    }
    tokens
}

/// Tokenizes a code snippet or code signature.
pub fn tokenize_snippet(text: &str) -> Vec<String> {
    split_word_runs(text)
}

/// Tokenizes an intent or a description. Case is preserved.
pub fn tokenize_nl(text: &str) -> Vec<String> {
    text.split_whitespace().flat_map(split_word_runs).collect()
}
