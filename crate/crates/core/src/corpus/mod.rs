//! Examples, tokenization, vocabularies, dataset splits and OOV statistics.

mod split;
mod stats;
pub mod synthetic;
mod tokenize;
mod vocab;

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use split::{
    classify_library, plan_split, Allowlist, LibraryClass, SplitConfig, SplitKind, SplitManifest,
};
pub use stats::{compute_oov_stats, oov_tokens, DatasetStats};
pub use synthetic::{generate_synthetic_corpus, SyntheticConfig, SyntheticCorpus};
pub use tokenize::{is_word_char, tokenize_nl, tokenize_snippet};
pub use vocab::{build_vocabulary, Vocabulary, BOS, EOS, PAD, UNK};

/// A documented API used by a snippet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiAnnotation {
    pub signature: String,
    pub description: String,
    /// `builtin`, `stdlib:<name>`, `thirdparty:<name>`, or a bare module name.
    pub library: String,
    /// The snippet symbol this annotation documents.
    pub primitive: String,
    /// Document-set key; derived from library and primitive when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

impl ApiAnnotation {
    /// Library-qualified key, e.g. `pandas.get_loc`.
    pub fn key(&self) -> String {
        if let Some(k) = &self.key {
            return k.clone();
        }
        let lib = self
            .library
            .split_once(':')
            .map(|(_, name)| name)
            .unwrap_or(&self.library);
        format!("{}.{}", lib, self.primitive)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExampleRecord {
    id: String,
    intent: String,
    snippet: String,
    #[serde(default)]
    apis: Vec<ApiAnnotation>,
}

/// One (intent, snippet, annotated APIs) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub intent: String,
    pub snippet: String,
    pub snippet_tokens: Vec<String>,
    pub apis: Vec<ApiAnnotation>,
    pub libraries: BTreeSet<String>,
}

impl Example {
    pub fn new(
        id: impl Into<String>,
        intent: impl Into<String>,
        snippet: impl Into<String>,
        apis: Vec<ApiAnnotation>,
    ) -> Result<Self> {
        let snippet = snippet.into();
        for api in &apis {
            if api.primitive.is_empty() || api.signature.is_empty() {
                return Err(Error::Format(
                    "annotation with empty primitive or signature".into(),
                ));
            }
        }
        let libraries = apis.iter().map(|a| a.library.clone()).collect();
        Ok(Example {
            id: id.into(),
            intent: intent.into(),
            snippet_tokens: tokenize_snippet(&snippet),
            snippet,
            apis,
            libraries,
        })
    }

    pub fn intent_tokens(&self) -> Vec<String> {
        tokenize_nl(&self.intent)
    }

    fn record(&self) -> ExampleRecord {
        ExampleRecord {
            id: self.id.clone(),
            intent: self.intent.clone(),
            snippet: self.snippet.clone(),
            apis: self.apis.clone(),
        }
    }
}

/// An ordered collection of examples with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    examples: Vec<Example>,
    by_id: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(examples: Vec<Example>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(examples.len());
        for (i, ex) in examples.iter().enumerate() {
            if by_id.insert(ex.id.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate example id {:?}", ex.id)));
            }
        }
        Ok(Dataset { examples, by_id })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Example> {
        self.by_id.get(id).map(|&i| &self.examples[i])
    }

    /// Resolves ids into examples; unknown ids are an error.
    pub fn select(&self, ids: &[String]) -> Result<Vec<&Example>> {
        ids.iter()
            .map(|id| {
                self.get(id)
                    .ok_or_else(|| Error::Missing(format!("example id {id:?}")))
            })
            .collect()
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut examples = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg,
            };
            let rec: ExampleRecord =
                serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            let ex = Example::new(rec.id, rec.intent, rec.snippet, rec.apis)
                .map_err(|e| parse_err(e.to_string()))?;
            examples.push(ex);
        }
        Dataset::new(examples)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for ex in &self.examples {
            serde_json::to_writer(&mut w, &ex.record())?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(lib: &str, prim: &str) -> ApiAnnotation {
        ApiAnnotation {
            signature: format!("{prim}(x)"),
            description: "does things".into(),
            library: lib.into(),
            primitive: prim.into(),
            key: None,
        }
    }

    #[test]
    fn example_derives_tokens_and_libraries() {
        let ex = Example::new(
            "1",
            "sort it",
            "np.sort(a)",
            vec![ann("thirdparty:numpy", "sort"), ann("builtin", "len")],
        )
        .unwrap();
        assert_eq!(ex.snippet_tokens, tokenize_snippet("np.sort(a)"));
        let libs: Vec<_> = ex.libraries.iter().cloned().collect();
        assert_eq!(libs, vec!["builtin".to_string(), "thirdparty:numpy".to_string()]);
        assert_eq!(ex.apis[0].key(), "numpy.sort");
    }

    #[test]
    fn empty_primitive_rejected() {
        assert!(Example::new("1", "a", "b", vec![ann("builtin", "")]).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = Example::new("1", "a", "b", vec![]).unwrap();
        assert!(Dataset::new(vec![a.clone(), a]).is_err());
    }

    #[test]
    fn jsonl_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"1\",\"intent\":\"a\",\"snippet\":\"b\",\"apis\":[]}\n{oops\n",
        )
        .unwrap();
        match Dataset::read_jsonl(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
