//! API document set, tf-idf retrieval and Recall@k.

mod porter;
mod retrieve;
mod tfidf;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use porter::porter_stem;
pub use retrieve::{
    oracle_retrieve, recall_at_k, retrieve_topk, RetrievalResult, Retriever, ScoredEntry,
    TfIdfRetriever,
};
pub use tfidf::{analyze, fit_index, score, SparseVector, TfIdfConfig, TfIdfIndex};

/// One signature/description pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiEntry {
    pub key: String,
    pub signature: String,
    pub description: String,
    pub library: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EntryRecord {
    key: String,
    signature: String,
    description: String,
    #[serde(default)]
    library: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
}

/// Entry counts reported by [`ingest_documents`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub kept: usize,
    pub dropped_empty: usize,
    pub deduped: usize,
}

/// Deduplicated entries in stable order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocumentSet {
    entries: Vec<ApiEntry>,
    provenance: Vec<String>,
    by_key: HashMap<String, usize>,
}

impl DocumentSet {
    pub fn entries(&self) -> &[ApiEntry] {
        &self.entries
    }

    pub fn provenance(&self, idx: usize) -> &str {
        &self.provenance[idx]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, key: &str) -> Option<usize> {
        self.by_key.get(key).copied()
    }

    pub fn get(&self, key: &str) -> Option<&ApiEntry> {
        self.position(key).map(|i| &self.entries[i])
    }

    /// Reads a JSON-lines document file and ingests it.
    pub fn read_jsonl(path: &Path) -> Result<(Self, IngestReport)> {
        let reader = BufReader::new(File::open(path)?);
        let mut raw = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EntryRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: e.to_string(),
            })?;
            let source = rec.source.unwrap_or_else(|| format!("{}:{}", path.display(), lineno + 1));
            raw.push((
                ApiEntry {
                    key: rec.key,
                    signature: rec.signature,
                    description: rec.description,
                    library: rec.library,
                },
                source,
            ));
        }
        Ok(ingest_documents(raw))
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (e, src) in self.entries.iter().zip(&self.provenance) {
            let rec = EntryRecord {
                key: e.key.clone(),
                signature: e.signature.clone(),
                description: e.description.clone(),
                library: e.library.clone(),
                source: Some(src.clone()),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds a document set. Among entries sharing a key, the one with the
/// longest signature survives (first wins on ties) at the position of the
/// key's first occurrence. Entries with blank descriptions are dropped.
pub fn ingest_documents<I>(raw: I) -> (DocumentSet, IngestReport)
where
    I: IntoIterator<Item = (ApiEntry, String)>,
{
    let mut set = DocumentSet::default();
    let mut report = IngestReport::default();
    for (entry, source) in raw {
        if entry.description.trim().is_empty() {
            report.dropped_empty += 1;
            continue;
        }
        match set.by_key.get(&entry.key) {
            Some(&i) => {
                report.deduped += 1;
                if entry.signature.len() > set.entries[i].signature.len() {
                    set.entries[i] = entry;
                    set.provenance[i] = source;
                }
            }
            None => {
                set.by_key.insert(entry.key.clone(), set.entries.len());
                set.entries.push(entry);
                set.provenance.push(source);
            }
        }
    }
    if report.dropped_empty > 0 {
        log::warn!("dropped {} entries with empty descriptions", report.dropped_empty);
    }
    report.kept = set.entries.len();
    (set, report)
}
