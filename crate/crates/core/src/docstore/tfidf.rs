//! Sparse tf-idf vectors over stemmed unigrams and bigrams.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::porter::porter_stem;
use super::DocumentSet;
use crate::corpus::{is_word_char, tokenize_nl};
use crate::error::{Error, Result};

const INDEX_MAGIC: &str = "docread-tfidf";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TfIdfConfig {
    pub bigrams: bool,
}

impl Default for TfIdfConfig {
    fn default() -> Self {
        TfIdfConfig { bigrams: true }
    }
}

/// Lowercased, stemmed word tokens followed by adjacent-pair bigrams.
/// Punctuation-only tokens are removed before bigrams are formed.
pub fn analyze(text: &str, config: TfIdfConfig) -> Vec<String> {
    let words: Vec<String> = tokenize_nl(text)
        .into_iter()
        .filter(|t| t.chars().any(is_word_char))
        .map(|t| porter_stem(&t.to_lowercase()))
        .collect();
    let mut features = words.clone();
    if config.bigrams {
        features.extend(words.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    }
    features
}

/// Feature id to weight, sorted by id, zero weights omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "SparseRecord", into = "SparseRecord")]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
    norm: f64,
}

#[derive(Serialize, Deserialize)]
struct SparseRecord {
    ids: Vec<u32>,
    weights: Vec<f64>,
}

impl From<SparseRecord> for SparseVector {
    fn from(r: SparseRecord) -> Self {
        SparseVector::new(r.ids.into_iter().zip(r.weights))
    }
}

impl From<SparseVector> for SparseRecord {
    fn from(v: SparseVector) -> Self {
        let (ids, weights) = v.entries.into_iter().unzip();
        SparseRecord { ids, weights }
    }
}

impl SparseVector {
    /// Builds from (id, weight) pairs; duplicate ids are summed.
    pub fn new(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (id, w) in pairs {
            *acc.entry(id).or_default() += w;
        }
        let entries: Vec<(u32, f64)> = acc.into_iter().filter(|(_, w)| *w != 0.0).collect();
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        SparseVector { entries, norm }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector::new(self.entries.iter().map(|&(id, w)| (id, w * factor)))
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn score(a: &SparseVector, b: &SparseVector) -> f64 {
    if a.norm == 0.0 || b.norm == 0.0 {
        return 0.0;
    }
    (a.dot(b) / (a.norm * b.norm)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfIndex {
    magic: String,
    version: u32,
    pub config: TfIdfConfig,
    /// Number of texts the idf was fitted on.
    pub fit_corpus_size: usize,
    features: Vec<String>,
    idf: Vec<f64>,
    documents: IndexMap<String, SparseVector>,
    #[serde(skip)]
    lookup: HashMap<String, u32>,
}

impl TfIdfIndex {
    fn rebuild_lookup(&mut self) {
        self.lookup = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i as u32))
            .collect();
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_id(&self, feature: &str) -> Option<u32> {
        self.lookup.get(feature).copied()
    }

    pub fn idf(&self, id: u32) -> f64 {
        self.idf[id as usize]
    }

    /// tf·idf vector of `text`; features outside the dictionary are dropped.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        SparseVector::new(
            analyze(text, self.config)
                .iter()
                .filter_map(|f| self.feature_id(f))
                .map(|id| (id, self.idf(id))),
        )
    }

    pub fn document_vector(&self, key: &str) -> Option<&SparseVector> {
        self.documents.get(key)
    }

    pub fn num_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut index: TfIdfIndex = serde_json::from_slice(&std::fs::read(path)?)?;
        if index.magic != INDEX_MAGIC {
            return Err(Error::Format(format!("{} is not a tf-idf index", path.display())));
        }
        if index.version != INDEX_VERSION {
            return Err(Error::Format(format!(
                "unsupported index version {} (expected {INDEX_VERSION})",
                index.version
            )));
        }
        if index.idf.len() != index.features.len() {
            return Err(Error::Format("idf and feature tables differ in length".into()));
        }
        index.rebuild_lookup();
        Ok(index)
    }
}

/// Fits idf over training intents plus every description, then stores each
/// description's tf·idf vector. idf(t) = ln((1 + N) / (1 + df(t))) + 1.
pub fn fit_index(intents: &[&str], documents: &DocumentSet, config: TfIdfConfig) -> Result<TfIdfIndex> {
    let n = intents.len() + documents.len();
    if n == 0 {
        return Err(Error::InvalidConfig("cannot fit tf-idf on an empty corpus".into()));
    }
    let analyzed_docs: Vec<Vec<String>> = documents
        .entries()
        .iter()
        .map(|e| analyze(&e.description, config))
        .collect();
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut add_df = |features: &[String]| {
        let mut uniq: Vec<&String> = features.iter().collect();
        uniq.sort();
        uniq.dedup();
        for f in uniq {
            *df.entry(f.clone()).or_default() += 1;
        }
    };
    for text in intents {
        add_df(&analyze(text, config));
    }
    for feats in &analyzed_docs {
        add_df(feats);
    }
    let n_f = n as f64;
    let (features, idf): (Vec<String>, Vec<f64>) = df
        .into_iter()
        .map(|(f, d)| {
            let idf = ((1.0 + n_f) / (1.0 + d as f64)).ln() + 1.0;
            (f, idf)
        })
        .unzip();
    let mut index = TfIdfIndex {
        magic: INDEX_MAGIC.into(),
        version: INDEX_VERSION,
        config,
        fit_corpus_size: n,
        features,
        idf,
        documents: IndexMap::new(),
        lookup: HashMap::new(),
    };
    index.rebuild_lookup();
    for (entry, feats) in documents.entries().iter().zip(analyzed_docs) {
        let vec = SparseVector::new(feats.iter().map(|f| {
            let id = index.lookup[f];
            (id, index.idf[id as usize])
        }));
        index.documents.insert(entry.key.clone(), vec);
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docstore::{ingest_documents, ApiEntry};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

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

    #[test]
    fn analyzer_stems_and_pairs() {
        let f = analyze("Sorting the Arrays, quickly!", TfIdfConfig::default());
        assert_eq!(f, vec!["sort", "the", "arrai", "quickli", "sort the", "the arrai", "arrai quickli"]);
    }

    #[test]
    fn single_document_idf_is_closed_form() {
        let index = fit_index(&[], &docs(&["reverse rows"]), TfIdfConfig::default()).unwrap();
        for id in 0..index.num_features() as u32 {
            assert_relative_eq!(index.idf(id), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ubiquitous_feature_has_minimal_idf() {
        let index = fit_index(
            &["sort rows"],
            &docs(&["sort the list", "sort keys", "count items"]),
            TfIdfConfig::default(),
        )
        .unwrap();
        let sort = index.idf(index.feature_id("sort").unwrap());
        let min = (0..index.num_features() as u32).map(|i| index.idf(i)).fold(f64::MAX, f64::min);
        assert_eq!(sort, min);
    }

    #[test]
    fn three_document_weights_match_hand_computation() {
        // Hand computation: N = 3; "a" in all three docs, "b" in two, "c" in one.
        // idf(a) = ln(4/4)+1 = 1, idf(b) = ln(4/3)+1, idf(c) = ln(4/2)+1.
        let cfg = TfIdfConfig { bigrams: false };
        let index = fit_index(&[], &docs(&["a b a", "a b", "a c"]), cfg).unwrap();
        let v = index.document_vector("k0").unwrap();
        let a = index.feature_id("a").unwrap();
        let b = index.feature_id("b").unwrap();
        let weights: HashMap<u32, f64> = v.entries().iter().copied().collect();
        assert_relative_eq!(weights[&a], 2.0, epsilon = 1e-12);
        assert_relative_eq!(weights[&b], (4.0f64 / 3.0).ln() + 1.0, epsilon = 1e-12);
        let c = index.feature_id("c").unwrap();
        assert_relative_eq!(index.idf(c), 2.0f64.ln() + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(
            fit_index(&[], &DocumentSet::default(), TfIdfConfig::default()),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn persistence_round_trip_and_magic_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        let index = fit_index(&["sort rows"], &docs(&["sort the rows"]), TfIdfConfig::default()).unwrap();
        index.save(&path).unwrap();
        let back = TfIdfIndex::load(&path).unwrap();
        assert_eq!(back, index);
        assert_eq!(back.vectorize("sort rows"), index.vectorize("sort rows"));
        std::fs::write(&path, b"{\"magic\":\"nope\"}").unwrap();
        assert!(TfIdfIndex::load(&path).is_err());
    }

    #[test]
    fn cosine_basics() {
        let a = SparseVector::new([(0, 1.0), (3, 2.0)]);
        let b = SparseVector::new([(1, 5.0)]);
        assert_relative_eq!(score(&a, &a), 1.0, epsilon = 1e-12);
        assert_eq!(score(&a, &b), 0.0);
        assert_eq!(score(&a, &SparseVector::default()), 0.0);
        assert_relative_eq!(score(&a.scaled(3.0), &b), score(&a, &b));
    }

    proptest! {
        #[test]
        fn norm_matches_weights(pairs in proptest::collection::vec((0u32..50, 0.0f64..10.0), 0..30)) {
            let v = SparseVector::new(pairs);
            let direct = v.entries().iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            prop_assert!((v.norm() - direct).abs() <= 1e-12);
            prop_assert!(v.entries().iter().all(|(_, w)| *w != 0.0));
        }
    }
}
