use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Dataset, Example, SplitManifest, Vocabulary};
use crate::error::Result;

/// Split sizes and dev-set OOV counts, laid out like a dataset-statistics table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub oov_primitives: usize,
    pub oov_examples: usize,
    pub pct_oov_examples: usize,
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# Train          {:>6}", self.n_train)?;
        writeln!(f, "# Dev            {:>6}", self.n_dev)?;
        writeln!(f, "# Test           {:>6}", self.n_test)?;
        writeln!(f, "# OOV primitives {:>6}", self.oov_primitives)?;
        writeln!(f, "# OOV examples   {:>6}", self.oov_examples)?;
        writeln!(f, "% OOV examples   {:>6}", self.pct_oov_examples)
    }
}

/// Distinct snippet tokens of `example` that are neither in `vocab` nor among
/// the example's intent tokens, in first-occurrence order. Matching is
/// case-sensitive.
pub fn oov_tokens(example: &Example, vocab: &Vocabulary) -> Vec<String> {
    let intent: HashSet<String> = example.intent_tokens().into_iter().collect();
    let mut seen = HashSet::new();
    example
        .snippet_tokens
        .iter()
        .filter(|t| !vocab.contains(t) && !intent.contains(*t))
        .filter(|t| seen.insert(t.as_str()))
        .cloned()
        .collect()
}

/// Counts OOV primitives as unique (dev example, token) pairs.
pub fn compute_oov_stats(
    dataset: &Dataset,
    manifest: &SplitManifest,
    vocab: &Vocabulary,
) -> Result<DatasetStats> {
    let dev = dataset.select(&manifest.dev)?;
    let mut oov_primitives = 0;
    let mut oov_examples = 0;
    for ex in dev {
        let n = oov_tokens(ex, vocab).len();
        oov_primitives += n;
        oov_examples += usize::from(n > 0);
    }
    let n_dev = manifest.dev.len();
    let pct_oov_examples = if n_dev == 0 {
        0
    } else {
        (100.0 * oov_examples as f64 / n_dev as f64).round() as usize
    };
    Ok(DatasetStats {
        n_train: manifest.train.len(),
        n_dev,
        n_test: manifest.test.len(),
        oov_primitives,
        oov_examples,
        pct_oov_examples,
    })
}
