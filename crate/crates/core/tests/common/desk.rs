//! End-to-end runs on the synthetic library split, shared by the training
//! tests and the acceptance suite.

use std::time::Instant;

use docread_core::corpus::*;
use docread_core::docstore::*;
use docread_core::evaltrain::*;
use docread_core::model::SearchMode;

/// A synthetic corpus split by library with a tf-idf index over its documents.
pub struct DeskData {
    pub corpus: SyntheticCorpus,
    pub manifest: SplitManifest,
    pub index: TfIdfIndex,
}

impl DeskData {
    pub fn new(config: &SyntheticConfig) -> DeskData {
        let corpus = generate_synthetic_corpus(config).unwrap();
        let sizes = SplitConfig {
            dev_size: config.n_dev,
            ..SplitConfig::default()
        };
        let manifest =
            plan_split(&corpus.dataset, SplitKind::Library, config.seed, &Allowlist::default(), sizes)
                .unwrap();
        let train = corpus.dataset.select(&manifest.train).unwrap();
        let intents: Vec<&str> = train.iter().map(|e| e.intent.as_str()).collect();
        let index = fit_index(&intents, &corpus.documents, TfIdfConfig::default()).unwrap();
        DeskData {
            corpus,
            manifest,
            index,
        }
    }

    pub fn train(&self) -> Vec<&Example> {
        self.corpus.dataset.select(&self.manifest.train).unwrap()
    }

    pub fn dev(&self) -> Vec<&Example> {
        self.corpus.dataset.select(&self.manifest.dev).unwrap()
    }

    pub fn descriptions(&self) -> Vec<&str> {
        self.corpus
            .documents
            .entries()
            .iter()
            .map(|e| e.description.as_str())
            .collect()
    }
}

/// Dev-set scores of the three settings for one seed.
#[derive(Debug, Clone)]
pub struct SettingScores {
    pub seed: u64,
    pub baseline: EvalReport,
    pub oracle: EvalReport,
    /// The oracle-trained model reading retrieved entries.
    pub partial: EvalReport,
    /// Dev examples whose gold OOV primitives were emittable by the baseline.
    pub baseline_reachable_oov: usize,
    pub seconds: f64,
}

/// Trains baseline and oracle models with the desk regime and beam-decodes dev.
pub fn run_settings(data: &DeskData, seed: u64, beam: usize) -> SettingScores {
    let start = Instant::now();
    let train_set = data.train();
    let dev = data.dev();
    let descs = data.descriptions();
    let config = TrainConfig {
        seed,
        ..TrainConfig::desk()
    };
    let k = config.model.k;
    let mode = SearchMode::Beam(beam);
    let fit = |src: DocSource<'_>| {
        let cfg = TrainConfig {
            doc_mode: src.mode,
            ..config.clone()
        };
        train::<f64>(&train_set, &dev, src, src, &descs, &cfg, None).unwrap()
    };
    let base = fit(DocSource::none());
    let baseline = evaluate(&base.model, "dev", &dev, DocSource::none(), mode).unwrap();
    let vocab = base.model.code_vocab();
    let baseline_reachable_oov = dev
        .iter()
        .filter(|ex| {
            let oov = oov_tokens(ex, vocab);
            let out = super::emittable_symbols(&base.model, &ex.intent_tokens(), &[]);
            oov.iter().any(|t| out.contains(t))
        })
        .count();
    let oracle_model = fit(DocSource::oracle(k)).model;
    let oracle = evaluate(&oracle_model, "dev", &dev, DocSource::oracle(k), mode).unwrap();
    let retrieved = DocSource::retrieved(k, &data.corpus.documents, &data.index);
    let partial = evaluate(&oracle_model, "dev", &dev, retrieved, mode).unwrap();
    SettingScores {
        seed,
        baseline,
        oracle,
        partial,
        baseline_reachable_oov,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Writes every artifact of a small pipeline run (corpus, manifest, index,
/// training log, checkpoint, report) into `dir`.
pub fn pipeline_artifacts(dir: &std::path::Path, seed: u64) {
    let config = SyntheticConfig::small(150, 30, 3, seed);
    let data = DeskData::new(&config);
    data.corpus.dataset.write_jsonl(&dir.join("dataset.jsonl")).unwrap();
    data.corpus.documents.write_jsonl(&dir.join("docs.jsonl")).unwrap();
    data.manifest.write(&dir.join("manifest.json")).unwrap();
    data.index.save(&dir.join("index.json")).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        patience: 2,
        seed,
        dev_limit: Some(10),
        model: docread_core::model::ModelConfig {
            max_decode_steps: 20,
            ..docread_core::model::ModelConfig::tiny()
        },
        ..TrainConfig::desk()
    };
    let (train_set, dev) = (data.train(), data.dev());
    let descs = data.descriptions();
    let src = DocSource::oracle(cfg.model.k);
    let out = train::<f64>(&train_set, &dev, src, src, &descs, &cfg, Some(&dir.join("train.log"))).unwrap();
    out.checkpoint(&cfg).unwrap().save(&dir.join("model.ckpt")).unwrap();
    let retrieved = DocSource::retrieved(cfg.model.k, &data.corpus.documents, &data.index);
    evaluate(&out.model, "dev", &dev, retrieved, SearchMode::Beam(3))
        .unwrap()
        .write_json(&dir.join("report.json"))
        .unwrap();
}

/// Runs [`pipeline_artifacts`] twice and compares every file byte for byte.
pub fn check_determinism(seed: u64) -> Result<usize, String> {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline_artifacts(a.path(), seed);
    pipeline_artifacts(b.path(), seed);
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in &names {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).map_err(|e| format!("{name:?}: {e}"))?;
        if x != y {
            return Err(format!("{name:?} differs between identical runs"));
        }
    }
    Ok(names.len())
}
