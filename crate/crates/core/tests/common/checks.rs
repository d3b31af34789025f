//! Metric, retrieval and split checks shared by the focused tests and the
//! acceptance suite. Each returns `Err` with a reason on the first violation.

use std::collections::{BTreeMap, HashSet};

use docread_core::corpus::*;
use docread_core::docstore::*;
use docread_core::evaltrain::bleu;
use docread_core::neural::Rng;
use serde::Deserialize;

#[derive(Deserialize)]
pub struct BleuFixture {
    pub hypotheses: Vec<Vec<String>>,
    pub references: Vec<Vec<String>>,
    pub bleu_all: f64,
    pub bleu_first10: f64,
    pub bleu_each: Vec<f64>,
}

pub fn bleu_fixture() -> BleuFixture {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/bleu_20.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn check_bleu_fixture() -> Result<(), String> {
    let f = bleu_fixture();
    let near = |what: &str, got: f64, want: f64| {
        if (got - want).abs() <= 1e-6 {
            Ok(())
        } else {
            Err(format!("{what}: {got} vs {want}"))
        }
    };
    near("all", bleu(&f.hypotheses, &f.references).unwrap(), f.bleu_all)?;
    near(
        "first10",
        bleu(&f.hypotheses[..10], &f.references[..10]).unwrap(),
        f.bleu_first10,
    )?;
    for (i, want) in f.bleu_each.iter().enumerate() {
        let got = bleu(&f.hypotheses[i..=i], &f.references[i..=i]).unwrap();
        near(&format!("pair {i}"), got, *want)?;
    }
    Ok(())
}

const ALPHABET: &[&str] = &["x", "df", "(", ")", ".", ",", "=", "sort", "pd", "np", "len", "1"];

/// A corpus of 1 to 12 sequences; each has at least one token.
pub fn random_corpus(rng: &mut Rng) -> Vec<Vec<String>> {
    (0..1 + rng.below(12))
        .map(|_| {
            (0..1 + rng.below(15))
                .map(|_| ALPHABET[rng.below(ALPHABET.len())].to_string())
                .collect()
        })
        .collect()
}

pub fn check_bleu_identity(corpora: usize, seed: u64) -> Result<(), String> {
    let mut rng = Rng::new(seed);
    for i in 0..corpora {
        let c = random_corpus(&mut rng);
        let b = bleu(&c, &c).unwrap();
        if (b - 100.0).abs() > 1e-9 {
            return Err(format!("corpus {i}: bleu(X, X) = {b}"));
        }
    }
    Ok(())
}

/// `count` pronounceable letter-only words; word `i` is unique.
pub fn unique_word(i: usize) -> String {
    const SYL: &[&str] = &["ka", "lo", "mi", "zu", "re", "ta", "vo", "ne", "si", "pu"];
    let mut w = String::from("q");
    let mut n = i;
    loop {
        w.push_str(SYL[n % SYL.len()]);
        n /= SYL.len();
        if n == 0 {
            break;
        }
    }
    w.push('x');
    w
}

const COMMON: &[&str] = &[
    "return", "array", "list", "sorted", "values", "element", "index", "first", "string",
    "split", "join", "column", "frame", "count", "number", "key", "file", "path", "read",
    "write", "date", "time", "format", "matrix", "shape", "sum", "mean", "filter", "map",
    "replace", "lower", "upper", "dictionary", "items", "length", "random", "integer",
];

fn random_text(rng: &mut Rng, words: usize) -> String {
    (0..words)
        .map(|_| COMMON[rng.below(COMMON.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// `n` entries whose descriptions mix common words with one unique word.
pub fn synthetic_documents(n: usize, seed: u64) -> DocumentSet {
    let mut rng = Rng::new(seed);
    let raw = (0..n).map(|i| {
        let words = 2 + rng.below(8);
        let desc = format!("{} {}", random_text(&mut rng, words), unique_word(i));
        (
            ApiEntry {
                key: format!("lib.f{i}"),
                signature: format!("lib.f{i}(x)"),
                description: desc,
                library: "thirdparty:lib".into(),
            },
            format!("gen:{i}"),
        )
    });
    ingest_documents(raw).0
}

/// Full scoring with independently computed idf and raw-count tf, ranked by
/// score with ties in document order.
pub fn brute_force_topk(
    query: &str,
    intents: &[String],
    docs: &DocumentSet,
    k: usize,
) -> Vec<(String, f64)> {
    let cfg = TfIdfConfig::default();
    let texts: Vec<Vec<String>> = intents
        .iter()
        .map(|t| analyze(t, cfg))
        .chain(docs.entries().iter().map(|e| analyze(&e.description, cfg)))
        .collect();
    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    for t in &texts {
        for f in t.iter().map(String::as_str).collect::<HashSet<_>>() {
            *df.entry(f).or_default() += 1.0;
        }
    }
    let n = texts.len() as f64;
    let vec_of = |feats: &[String]| -> BTreeMap<String, f64> {
        let mut v = BTreeMap::new();
        for f in feats {
            if let Some(d) = df.get(f.as_str()) {
                *v.entry(f.clone()).or_insert(0.0) += ((1.0 + n) / (1.0 + d)).ln() + 1.0;
            }
        }
        v
    };
    let cos = |a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>| -> f64 {
        let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        a.iter().filter_map(|(f, x)| b.get(f).map(|y| x * y)).sum::<f64>() / (na * nb)
    };
    let q = vec_of(&analyze(query, cfg));
    let mut scored: Vec<(String, f64)> = docs
        .entries()
        .iter()
        .zip(&texts[intents.len()..])
        .map(|(e, t)| (e.key.clone(), cos(&q, &vec_of(t))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(k);
    scored
}

/// `retrieve_topk` against brute force on random queries. Ranks must agree
/// exactly except between entries whose scores differ by less than 1e-12.
pub fn check_retriever_brute_force(queries: usize, docs: usize, seed: u64) -> Result<(), String> {
    let set = synthetic_documents(docs, seed);
    let mut rng = Rng::new(seed + 1);
    let intents: Vec<String> = (0..300).map(|_| random_text(&mut rng, 5)).collect();
    let refs: Vec<&str> = intents.iter().map(String::as_str).collect();
    let index = fit_index(&refs, &set, TfIdfConfig::default()).map_err(|e| e.to_string())?;
    for q in 0..queries {
        let words = 1 + rng.below(7);
        let mut query = random_text(&mut rng, words);
        if rng.below(3) == 0 {
            query.push(' ');
            query.push_str(&unique_word(rng.below(docs)));
        }
        let k = 1 + rng.below(10);
        let got = retrieve_topk(&format!("q{q}"), &query, &set, &index, k);
        let want = brute_force_topk(&query, &intents, &set, k);
        if got.entries.len() != want.len() {
            return Err(format!("query {q}: {} results, expected {}", got.entries.len(), want.len()));
        }
        for (r, (g, (wk, ws))) in got.entries.iter().zip(&want).enumerate() {
            if (g.score - ws).abs() > 1e-12 {
                return Err(format!("query {q:?} rank {r}: score {} vs {ws}", g.score));
            }
            if g.key != *wk {
                let gs = want.iter().find(|(k, _)| *k == g.key).map(|p| p.1);
                let tied = gs.is_some_and(|s| (s - ws).abs() < 1e-12);
                if !tied {
                    return Err(format!("query {query:?} rank {r}: {} vs {wk}", g.key));
                }
            }
        }
    }
    Ok(())
}

/// Recall@k when every query is exactly one entry's description.
pub fn echo_recall(docs: usize, k: usize, seed: u64) -> f64 {
    let set = synthetic_documents(docs, seed);
    let index = fit_index(&[], &set, TfIdfConfig::default()).unwrap();
    let (results, gold): (Vec<_>, Vec<_>) = set
        .entries()
        .iter()
        .map(|e| {
            (
                retrieve_topk(&e.key, &e.description, &set, &index, k),
                vec![e.key.clone()],
            )
        })
        .unzip();
    100.0 * recall_at_k(&results, &gold).unwrap()
}

fn random_sparse(rng: &mut Rng, ids: std::ops::Range<u32>) -> SparseVector {
    let span = (ids.end - ids.start) as usize;
    SparseVector::new((0..1 + rng.below(8)).map(|_| {
        let id = ids.start + rng.below(span) as u32;
        (id, rng.uniform(0.05, 3.0))
    }))
}

pub fn check_cosine_properties(pairs: usize, seed: u64) -> Result<(), String> {
    let mut rng = Rng::new(seed);
    for i in 0..pairs {
        let a = random_sparse(&mut rng, 0..40);
        let b = random_sparse(&mut rng, 0..40);
        let far = random_sparse(&mut rng, 100..140);
        let c = rng.uniform(0.01, 50.0);
        let self_sim = score(&a, &a);
        if (self_sim - 1.0).abs() > 1e-12 {
            return Err(format!("pair {i}: identity {self_sim}"));
        }
        if score(&a, &far) != 0.0 {
            return Err(format!("pair {i}: orthogonal {}", score(&a, &far)));
        }
        let (s, sc) = (score(&a, &b), score(&a.scaled(c), &b));
        if (s - sc).abs() > 1e-12 || (s - score(&b, &a)).abs() > 1e-15 {
            return Err(format!("pair {i}: scale/symmetry {s} vs {sc}"));
        }
    }
    Ok(())
}

/// Library split of a synthetic corpus checked against its recorded ground
/// truth: OOV counts per dev example and the train/eval library purity.
pub fn check_split_fidelity(config: &SyntheticConfig) -> Result<DatasetStats, String> {
    let corpus = generate_synthetic_corpus(config).map_err(|e| e.to_string())?;
    let ds = &corpus.dataset;
    let allow = Allowlist::default();
    let sizes = SplitConfig {
        dev_size: config.n_dev,
        ..SplitConfig::default()
    };
    let m = plan_split(ds, SplitKind::Library, config.seed, &allow, sizes)
        .map_err(|e| e.to_string())?;
    m.validate(ds).map_err(|e| e.to_string())?;
    let is_third = |lib: &str| classify_library(lib, &allow) == Some(LibraryClass::ThirdParty);
    for id in &m.train {
        if ds.get(id).unwrap().libraries.iter().any(|l| is_third(l)) {
            return Err(format!("train example {id} uses a third-party library"));
        }
    }
    for id in m.dev.iter().chain(&m.test) {
        if !ds.get(id).unwrap().libraries.iter().any(|l| is_third(l)) {
            return Err(format!("eval example {id} has no third-party library"));
        }
    }
    let train = ds.select(&m.train).unwrap();
    let vocab = build_vocabulary(&train, 1).unwrap();
    let stats = compute_oov_stats(ds, &m, &vocab).map_err(|e| e.to_string())?;
    let expected: Vec<&Vec<String>> = m.dev.iter().map(|id| &corpus.expected_oov[id]).collect();
    let prims: usize = expected.iter().map(|v| v.len()).sum();
    let exs = expected.iter().filter(|v| !v.is_empty()).count();
    let want = (config.n_train, config.n_dev, config.n_test, prims, exs);
    let got = (stats.n_train, stats.n_dev, stats.n_test, stats.oov_primitives, stats.oov_examples);
    if got != want {
        return Err(format!("stats {got:?}, ground truth {want:?}"));
    }
    for id in &m.dev {
        let ex = ds.get(id).unwrap();
        if oov_tokens(ex, &vocab) != corpus.expected_oov[id] {
            return Err(format!("dev example {id}: OOV tokens differ from ground truth"));
        }
    }
    Ok(stats)
}
