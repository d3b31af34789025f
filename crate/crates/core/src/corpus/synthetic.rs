//! Deterministic templated corpus standing in for an annotated intent/snippet
//! dataset with API documentation.
//!
//! Training-side examples use only `builtin` and `stdlib:*` primitives; the
//! evaluation pool uses `thirdparty:*` libraries whose names and primitives
//! never occur in a training snippet, so every evaluation example carries at
//! least one OOV primitive under the library split.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ApiAnnotation, Dataset, Example};
use crate::docstore::{ingest_documents, ApiEntry, DocumentSet};
use crate::error::{Error, Result};

const VERBS: &[&str] = &[
    "reverse", "sort", "count", "merge", "split", "flatten", "normalize", "filter", "shuffle",
    "compress", "encode", "decode", "parse", "format", "round", "clip", "stack", "join", "group",
    "rank", "scale", "rotate", "pad", "strip", "hash", "sample", "invert", "transpose", "load",
    "save", "copy", "compare", "search", "replace", "extract", "convert", "validate", "sum",
];

const OBJECTS: &[&str] = &[
    "rows", "columns", "keys", "values", "items", "lines", "words", "bytes", "digits", "chars",
    "fields", "cells", "nodes", "edges", "labels", "tokens", "pixels", "dates", "paths", "records",
    "entries", "blocks", "frames", "vectors", "strings", "numbers", "files", "sections", "pairs",
    "weights",
];

const CONTAINERS: &[&str] = &[
    "array", "sequence", "table", "list", "object", "buffer", "collection", "mapping",
];

const VARIABLES: &[&str] = &[
    "arr", "df", "lst", "data", "text", "vals", "items", "mat", "frame", "series", "nums", "words",
    "path", "buf", "table", "grid",
];

const PARAMS: &[&str] = &["a", "obj", "x", "seq", "data", "values"];

const EXTRAS: &[&str] = &["axis=None", "inplace=False", "copy=True", "key=None", "strict=False"];

const FILLERS: &[&str] = &[
    "Returns a new object.",
    "The input is not modified.",
    "Raises an error if the input is empty.",
    "This is equivalent to a loop over the input.",
    "Missing entries are ignored.",
    "The result has the same type as the input.",
];

const STDLIB_NAMES: &[&str] = &[
    "os", "re", "math", "json", "string", "random", "itertools", "collections", "shutil",
    "textwrap", "heapq", "bisect", "statistics", "operator", "functools", "glob",
];

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "st", "tr",
    "pl", "gl", "sn", "qu",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u"];
const CODAS: &[&str] = &["", "n", "r", "l", "k", "x", "m", "s"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Builtin/stdlib examples.
    pub n_train: usize,
    /// Third-party examples destined for the dev partition.
    pub n_dev: usize,
    /// Third-party examples destined for the test partition.
    pub n_test: usize,
    pub n_stdlib_libs: usize,
    pub n_thirdparty_libs: usize,
    pub n_builtins: usize,
    pub primitives_per_lib: usize,
    /// Documented entries no example uses.
    pub n_distractors: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_train: 2000,
            n_dev: 200,
            n_test: 200,
            n_stdlib_libs: 8,
            n_thirdparty_libs: 6,
            n_builtins: 12,
            primitives_per_lib: 20,
            n_distractors: 40,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn small(n_train: usize, n_dev: usize, libs: usize, seed: u64) -> Self {
        SyntheticConfig {
            n_train,
            n_dev,
            n_test: n_dev,
            n_thirdparty_libs: libs,
            seed,
            ..Default::default()
        }
    }
}

/// Corpus plus construction-time ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub dataset: Dataset,
    pub documents: DocumentSet,
    /// Third-party symbols of each evaluation example, in snippet order; under
    /// the library split these are exactly the example's OOV primitives.
    pub expected_oov: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone)]
struct Primitive {
    name: String,
    verb: &'static str,
    object: &'static str,
    /// `builtin`, `stdlib:<lib>`, `thirdparty:<lib>`
    library: String,
    /// Module prefix used in snippets; empty for builtins.
    module: String,
    signature: String,
    description: String,
}

impl Primitive {
    fn annotation(&self) -> ApiAnnotation {
        ApiAnnotation {
            signature: self.signature.clone(),
            description: self.description.clone(),
            library: self.library.clone(),
            primitive: self.name.clone(),
            key: None,
        }
    }

    fn entry(&self) -> ApiEntry {
        let ann = self.annotation();
        ApiEntry {
            key: ann.key(),
            signature: ann.signature,
            description: ann.description,
            library: ann.library,
        }
    }

    fn call(&self, inner: &str) -> String {
        if self.module.is_empty() {
            format!("{}({})", self.name, inner)
        } else {
            format!("{}.{}({})", self.module, self.name, inner)
        }
    }
}

struct NameGen {
    used: HashSet<String>,
}

impl NameGen {
    fn new() -> Self {
        let used = VERBS
            .iter()
            .chain(OBJECTS)
            .chain(CONTAINERS)
            .chain(VARIABLES)
            .chain(PARAMS)
            .chain(STDLIB_NAMES)
            .chain(&["the", "all", "of", "how", "to", "in", "then", "and", "for", "by"])
            .map(|s| s.to_string())
            .collect();
        NameGen { used }
    }

    fn syllable(rng: &mut ChaCha8Rng) -> String {
        format!(
            "{}{}{}",
            ONSETS.choose(rng).unwrap(),
            NUCLEI.choose(rng).unwrap(),
            CODAS.choose(rng).unwrap()
        )
    }

    fn fresh(&mut self, rng: &mut ChaCha8Rng, syllables: usize, allow_underscore: bool) -> String {
        loop {
            let mut name: String = (0..syllables).map(|_| Self::syllable(rng)).collect();
            if allow_underscore && rng.gen_bool(0.4) {
                name.push('_');
                name.push_str(&Self::syllable(rng));
            }
            if name.len() >= 4 && self.used.insert(name.clone()) {
                return name;
            }
        }
    }
}

fn third_person(verb: &str) -> String {
    if verb.ends_with('s') || verb.ends_with("sh") || verb.ends_with("ch") || verb.ends_with('x') {
        format!("{verb}es")
    } else {
        format!("{verb}s")
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn make_primitives(
    rng: &mut ChaCha8Rng,
    names: &mut NameGen,
    library: String,
    module: String,
    count: usize,
) -> Vec<Primitive> {
    let mut concepts: Vec<(&'static str, &'static str)> = VERBS
        .iter()
        .flat_map(|v| OBJECTS.iter().map(move |o| (*v, *o)))
        .collect();
    concepts.shuffle(rng);
    concepts
        .into_iter()
        .take(count)
        .enumerate()
        .map(|(i, (verb, object))| {
            let name = names.fresh(rng, 2, true);
            let param = PARAMS.choose(rng).unwrap();
            let mut args = vec![param.to_string()];
            if i % 2 == 0 {
                args.push("n=1".into());
            }
            if rng.gen_bool(0.5) {
                args.push(EXTRAS.choose(rng).unwrap().to_string());
            }
            let qualified = if module.is_empty() {
                name.clone()
            } else {
                format!("{module}.{name}")
            };
            let signature = format!("{}({})", qualified, args.join(", "));
            let mut description = format!(
                "{} the {} of the given {}.",
                capitalize(&third_person(verb)),
                object,
                CONTAINERS.choose(rng).unwrap()
            );
            if rng.gen_bool(0.6) {
                description.push(' ');
                description.push_str(FILLERS.choose(rng).unwrap());
            }
            Primitive {
                name,
                verb,
                object,
                library: library.clone(),
                module: module.clone(),
                signature,
                description,
            }
        })
        .collect()
}

fn intent_phrase(rng: &mut ChaCha8Rng, p: &Primitive) -> String {
    match rng.gen_range(0..3) {
        0 => format!("{} the {}", p.verb, p.object),
        1 => format!("{} all {}", p.verb, p.object),
        _ => format!("{} {}", p.verb, p.object),
    }
}

/// Builds one example over `chain` (applied innermost first) with an optional
/// builtin wrapper applied last.
fn compose(
    rng: &mut ChaCha8Rng,
    id: String,
    chain: &[&Primitive],
    wrapper: Option<&Primitive>,
    force_number: bool,
) -> Result<Example> {
    let var = *VARIABLES.choose(rng).unwrap();
    let mut expr = var.to_string();
    let mut phrases = Vec::new();
    for (i, p) in chain.iter().enumerate() {
        let arg = if i == 0 && p.signature.contains("n=1") && (force_number || rng.gen_bool(0.5)) {
            let n = rng.gen_range(2..10);
            phrases.push(format!("{} by {n}", intent_phrase(rng, p)));
            format!("{expr}, {n}")
        } else {
            phrases.push(intent_phrase(rng, p));
            expr.clone()
        };
        expr = p.call(&arg);
    }
    if let Some(w) = wrapper {
        phrases.push(intent_phrase(rng, w));
        expr = w.call(&expr);
    }
    let intent = match rng.gen_range(0..3) {
        0 => format!("{} of '{}'", phrases.join(" then "), var),
        1 => format!("how to {} in '{}'", phrases.join(" and then "), var),
        _ => format!("{} for {} '{}'", phrases.join(" then "), CONTAINERS.choose(rng).unwrap(), var),
    };
    let mut apis: Vec<ApiAnnotation> = chain.iter().rev().map(|p| p.annotation()).collect();
    if let Some(w) = wrapper {
        apis.insert(0, w.annotation());
    }
    Example::new(id, intent, expr, apis)
}

/// Generates a corpus and its document set; identical configs give identical output.
pub fn generate_synthetic_corpus(config: &SyntheticConfig) -> Result<SyntheticCorpus> {
    if config.n_train == 0 || config.n_dev + config.n_test == 0 {
        return Err(Error::InvalidConfig("synthetic corpus needs train and eval examples".into()));
    }
    if config.n_thirdparty_libs == 0 || config.n_builtins == 0 || config.primitives_per_lib == 0 {
        return Err(Error::InvalidConfig("synthetic corpus needs libraries and primitives".into()));
    }
    if config.n_stdlib_libs == 0 || config.n_stdlib_libs > STDLIB_NAMES.len() {
        return Err(Error::InvalidConfig(format!(
            "between 1 and {} stdlib libraries are supported",
            STDLIB_NAMES.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut names = NameGen::new();

    let builtins = make_primitives(&mut rng, &mut names, "builtin".into(), String::new(), config.n_builtins);
    let stdlib: Vec<Vec<Primitive>> = STDLIB_NAMES[..config.n_stdlib_libs]
        .iter()
        .map(|lib| {
            make_primitives(&mut rng, &mut names, format!("stdlib:{lib}"), lib.to_string(), config.primitives_per_lib)
        })
        .collect();
    let thirdparty: Vec<Vec<Primitive>> = (0..config.n_thirdparty_libs)
        .map(|_| {
            let lib = names.fresh(&mut rng, 2, false);
            make_primitives(&mut rng, &mut names, format!("thirdparty:{lib}"), lib, config.primitives_per_lib)
        })
        .collect();
    // The first training examples are fixed so that everything an evaluation
    // snippet shares with training (the call punctuation, the comma of a second
    // argument, the builtin wrappers) is guaranteed to be in the vocabulary.
    let n_wrappers = 3.min(builtins.len()).min(config.n_train.saturating_sub(1));
    let wrappers: Vec<&Primitive> = builtins.iter().take(n_wrappers).collect();

    let mut examples = Vec::new();
    let mut expected_oov = BTreeMap::new();
    let mut counter = 0usize;
    let mut next_id = || {
        counter += 1;
        format!("syn-{counter:05}")
    };

    for i in 0..config.n_train {
        let (chain, force_number): (Vec<&Primitive>, bool) = if i == 0 {
            (vec![&stdlib[0][0]], true)
        } else if i <= wrappers.len() {
            (vec![wrappers[i - 1]], false)
        } else {
            let lib_choice = rng.gen_range(0..=stdlib.len());
            let prims = if lib_choice == stdlib.len() {
                &builtins
            } else {
                &stdlib[lib_choice]
            };
            if rng.gen_bool(0.2) && prims.len() >= 2 {
                (prims.choose_multiple(&mut rng, 2).collect(), false)
            } else {
                (vec![prims.choose(&mut rng).unwrap()], false)
            }
        };
        let wrapper = (i > wrappers.len() && !chain[0].module.is_empty() && rng.gen_bool(0.15))
            .then(|| builtins.choose(&mut rng).unwrap());
        examples.push(compose(&mut rng, next_id(), &chain, wrapper, force_number)?);
    }
    for _ in 0..config.n_dev + config.n_test {
        let lib = thirdparty.choose(&mut rng).unwrap();
        let chain: Vec<&Primitive> = if rng.gen_bool(0.2) && lib.len() >= 2 {
            lib.choose_multiple(&mut rng, 2).collect()
        } else {
            vec![lib.choose(&mut rng).unwrap()]
        };
        let wrapper = if rng.gen_bool(0.15) {
            wrappers.choose(&mut rng).copied()
        } else {
            None
        };
        let ex = compose(&mut rng, next_id(), &chain, wrapper, false)?;
        let mut oov = vec![chain[0].module.clone()];
        // snippet order: outermost call first
        for p in chain.iter().rev() {
            if !oov.contains(&p.name) {
                oov.push(p.name.clone());
            }
        }
        expected_oov.insert(ex.id.clone(), oov);
        examples.push(ex);
    }
    examples.shuffle(&mut rng);

    let mut entries: Vec<(ApiEntry, String)> = builtins
        .iter()
        .chain(stdlib.iter().flatten())
        .chain(thirdparty.iter().flatten())
        .map(|p| (p.entry(), "synthetic".to_string()))
        .collect();
    if config.n_distractors > 0 {
        let distractors = make_primitives(
            &mut rng,
            &mut names,
            "thirdparty:extras".into(),
            "extras".into(),
            config.n_distractors,
        );
        entries.extend(distractors.iter().map(|p| (p.entry(), "synthetic-distractor".to_string())));
    }
    let (documents, _) = ingest_documents(entries);
    Ok(SyntheticCorpus {
        dataset: Dataset::new(examples)?,
        documents,
        expected_oov,
    })
}
