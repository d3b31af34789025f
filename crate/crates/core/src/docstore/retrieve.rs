use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::tfidf::{score, TfIdfIndex};
use super::DocumentSet;
use crate::corpus::Example;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntry {
    pub key: String,
    pub score: f64,
}

/// Top-k entries for one intent, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub intent_id: String,
    pub k: usize,
    pub entries: Vec<ScoredEntry>,
}

impl RetrievalResult {
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.key.as_str())
    }
}

/// Relevance scoring of every document-set entry against an intent.
pub trait Retriever {
    fn documents(&self) -> &DocumentSet;

    /// One score per entry, in document-set order.
    fn score_all(&self, intent: &str) -> Vec<f64>;

    /// Ranks by score, ties by document-set order; returns min(k, |D|) entries.
    fn retrieve(&self, intent_id: &str, intent: &str, k: usize) -> RetrievalResult {
        let scores = self.score_all(intent);
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let docs = self.documents();
        RetrievalResult {
            intent_id: intent_id.to_string(),
            k,
            entries: order
                .into_iter()
                .take(k)
                .map(|i| ScoredEntry {
                    key: docs.entries()[i].key.clone(),
                    score: scores[i],
                })
                .collect(),
        }
    }
}

/// Cosine similarity between tf-idf vectors of the intent and each description.
pub struct TfIdfRetriever<'a> {
    pub index: &'a TfIdfIndex,
    pub documents: &'a DocumentSet,
}

impl Retriever for TfIdfRetriever<'_> {
    fn documents(&self) -> &DocumentSet {
        self.documents
    }

    fn score_all(&self, intent: &str) -> Vec<f64> {
        let query = self.index.vectorize(intent);
        self.documents
            .entries()
            .iter()
            .map(|e| {
                self.index
                    .document_vector(&e.key)
                    .map_or(0.0, |d| score(&query, d))
            })
            .collect()
    }
}

/// tf-idf top-k retrieval for one intent.
pub fn retrieve_topk(
    intent_id: &str,
    intent: &str,
    documents: &DocumentSet,
    index: &TfIdfIndex,
    k: usize,
) -> RetrievalResult {
    TfIdfRetriever { index, documents }.retrieve(intent_id, intent, k)
}

/// The example's own annotated entries (deduplicated, annotation order),
/// each with score 1, capped at `k`.
pub fn oracle_retrieve(example: &Example, k: usize) -> RetrievalResult {
    let mut seen = HashSet::new();
    let entries = example
        .apis
        .iter()
        .map(|a| a.key())
        .filter(|key| seen.insert(key.clone()))
        .take(k)
        .map(|key| ScoredEntry { key, score: 1.0 })
        .collect();
    RetrievalResult {
        intent_id: example.id.clone(),
        k,
        entries,
    }
}

/// Micro-averaged fraction of gold keys found in the matching top-k lists.
/// Examples without gold keys are skipped; returns 0 when there is no gold.
pub fn recall_at_k(results: &[RetrievalResult], gold: &[Vec<String>]) -> Result<f64> {
    if results.len() != gold.len() {
        return Err(Error::LengthMismatch(results.len(), gold.len()));
    }
    if let Some(first) = results.first() {
        if results.iter().any(|r| r.k != first.k) {
            return Err(Error::InvalidConfig("results were retrieved with different k".into()));
        }
    }
    let (mut hit, mut total) = (0usize, 0usize);
    for (res, keys) in results.iter().zip(gold) {
        let retrieved: HashSet<&str> = res.keys().collect();
        let unique: HashSet<&String> = keys.iter().collect();
        total += unique.len();
        hit += unique.iter().filter(|k| retrieved.contains(k.as_str())).count();
    }
    Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ApiAnnotation;
    use crate::docstore::{fit_index, ingest_documents, ApiEntry, TfIdfConfig};

    fn docs(descs: &[&str]) -> DocumentSet {
        ingest_documents(descs.iter().enumerate().map(|(i, d)| {
            (
                ApiEntry {
                    key: format!("k{i}"),
                    signature: format!("f{i}()"),
                    description: d.to_string(),
                    library: "builtin".into(),
                },
                String::new(),
            )
        }))
        .0
    }

    fn annotated(n: usize) -> Example {
        let apis = (0..n)
            .map(|i| ApiAnnotation {
                signature: format!("f{i}()"),
                description: "d".into(),
                library: "builtin".into(),
                primitive: format!("f{i}"),
                key: None,
            })
            .collect();
        Example::new("e", "intent", "f0()", apis).unwrap()
    }

    #[test]
    fn exact_description_ranks_first() {
        let d = docs(&["count the words", "reverse matrix rows", "parse json text"]);
        let index = fit_index(&[], &d, TfIdfConfig::default()).unwrap();
        let r = retrieve_topk("q", "reverse matrix rows", &d, &index, 5);
        assert_eq!(r.entries.len(), 3);
        assert_eq!(r.entries[0].key, "k1");
        assert!((r.entries[0].score - 1.0).abs() < 1e-12);
        assert!(r.entries.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn unknown_intent_falls_back_to_document_order() {
        let d = docs(&["alpha", "beta", "gamma"]);
        let index = fit_index(&[], &d, TfIdfConfig::default()).unwrap();
        let r = retrieve_topk("q", "zzz qqq", &d, &index, 2);
        let keys: Vec<_> = r.keys().collect();
        assert_eq!(keys, vec!["k0", "k1"]);
        assert!(r.entries.iter().all(|e| e.score == 0.0));
    }

    #[test]
    fn oracle_caps_and_handles_empty() {
        assert_eq!(oracle_retrieve(&annotated(2), 5).entries.len(), 2);
        assert!(oracle_retrieve(&annotated(0), 5).entries.is_empty());
        let r = oracle_retrieve(&annotated(7), 5);
        let keys: Vec<_> = r.keys().collect();
        assert_eq!(keys, vec!["builtin.f0", "builtin.f1", "builtin.f2", "builtin.f3", "builtin.f4"]);
    }

    #[test]
    fn recall_counts_micro_average() {
        let mk = |keys: &[&str]| RetrievalResult {
            intent_id: String::new(),
            k: 2,
            entries: keys.iter().map(|k| ScoredEntry { key: k.to_string(), score: 1.0 }).collect(),
        };
        let results = vec![mk(&["a", "b"]), mk(&["c", "d"]), mk(&["e", "f"])];
        let gold = vec![
            vec!["a".to_string()],
            vec!["c".to_string(), "x".to_string(), "y".to_string()],
            vec![],
        ];
        assert!((recall_at_k(&results, &gold).unwrap() - 0.5).abs() < 1e-12);
        let perfect = vec![vec!["a".to_string(), "b".to_string()], vec!["d".to_string()], vec![]];
        assert_eq!(recall_at_k(&results, &perfect).unwrap(), 1.0);
    }
}
