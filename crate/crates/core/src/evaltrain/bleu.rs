use std::collections::HashMap;

use crate::corpus::{oov_tokens, Example, Vocabulary};
use crate::error::{Error, Result};

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU-4 on a 0–100 scale.
///
/// Clipped n-gram precisions are pooled over the corpus. A zero precision for
/// n ≥ 2 is replaced by `1 / (total + 1)` (add-one); a zero unigram precision
/// gives 0.
pub fn bleu(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch(hypotheses.len(), references.len()));
    }
    if hypotheses.is_empty() {
        return Err(Error::InvalidConfig("BLEU over an empty corpus".into()));
    }
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=4 {
            let rc = ngram_counts(r, n);
            for (gram, c) in ngram_counts(h, n) {
                matches[n - 1] += c.min(rc.get(gram).copied().unwrap_or(0));
            }
            totals[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    if matches[0] == 0 || hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        let p = if matches[n] == 0 {
            1.0 / (totals[n] as f64 + 1.0)
        } else {
            matches[n] as f64 / totals[n] as f64
        };
        log_sum += p.ln() / 4.0;
    }
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok((100.0 * bp * log_sum.exp()).clamp(0.0, 100.0))
}

/// Gold OOV primitives of one example that occur in its hypothesis.
pub fn recalled_oov(example: &Example, hypothesis: &[String], vocab: &Vocabulary) -> (Vec<String>, usize) {
    let gold = oov_tokens(example, vocab);
    let total = gold.len();
    let hits = gold.into_iter().filter(|t| hypothesis.contains(t)).collect();
    (hits, total)
}

/// Percentage of gold OOV primitives (absent from `vocab` and from the
/// example's intent) that appear anywhere in the matching hypothesis.
/// Returns 0 when there are none.
pub fn oov_recall(hypotheses: &[Vec<String>], examples: &[&Example], vocab: &Vocabulary) -> Result<f64> {
    if hypotheses.len() != examples.len() {
        return Err(Error::LengthMismatch(hypotheses.len(), examples.len()));
    }
    let (mut hit, mut total) = (0usize, 0usize);
    for (h, ex) in hypotheses.iter().zip(examples) {
        let (found, n) = recalled_oov(ex, h, vocab);
        hit += found.len();
        total += n;
    }
    Ok(if total == 0 {
        0.0
    } else {
        100.0 * hit as f64 / total as f64
    })
}
