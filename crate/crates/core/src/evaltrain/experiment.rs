use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bleu::{bleu, recalled_oov};
use super::train::{train, DocMode, DocSource, EpochRecord, TrainConfig, TrainOutcome};
use crate::corpus::{Dataset, Example, SplitManifest};
use crate::docstore::{DocumentSet, TfIdfIndex};
use crate::error::{Error, Result};
use crate::model::{Model, SearchMode};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    pub id: String,
    pub intent: String,
    pub hypothesis: Vec<String>,
    pub reference: Vec<String>,
    pub retrieved: Vec<String>,
    /// Gold OOV primitives that the hypothesis contains.
    pub copied_oov: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub bleu: f64,
    pub oov_recall: f64,
    pub examples: Vec<ExampleReport>,
}

impl EvalReport {
    /// Plain-text intent / retrieved / reference / hypothesis listing.
    pub fn side_by_side(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "split: {}  BLEU: {:.2}  OOV recall: {:.2}\n",
            self.split, self.bleu, self.oov_recall
        );
        for ex in &self.examples {
            let _ = writeln!(out, "[{}] {}", ex.id, ex.intent);
            for key in &ex.retrieved {
                let _ = writeln!(out, "  doc: {key}");
            }
            let _ = writeln!(out, "  gold: {}", ex.reference.join(" "));
            let _ = writeln!(out, "  pred: {}", ex.hypothesis.join(" "));
            if !ex.copied_oov.is_empty() {
                let _ = writeln!(out, "  oov:  {}", ex.copied_oov.join(" "));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Decodes every example and scores the split.
pub fn evaluate<S: Scalar>(
    model: &Model<S>,
    split: &str,
    examples: &[&Example],
    docs: DocSource<'_>,
    mode: SearchMode,
) -> Result<EvalReport> {
    let max_steps = model.config().max_decode_steps;
    let mut records = Vec::with_capacity(examples.len());
    let (mut hit, mut total) = (0usize, 0usize);
    for ex in examples {
        let entries = docs.entries(ex)?;
        let decoded = model.decode(&ex.intent_tokens(), &entries, mode, max_steps)?;
        let (copied, n) = recalled_oov(ex, &decoded.tokens, model.code_vocab());
        hit += copied.len();
        total += n;
        records.push(ExampleReport {
            id: ex.id.clone(),
            intent: ex.intent.clone(),
            hypothesis: decoded.tokens,
            reference: ex.snippet_tokens.clone(),
            retrieved: entries.into_iter().map(|e| e.key).collect(),
            copied_oov: copied,
        });
    }
    let hyps: Vec<Vec<String>> = records.iter().map(|r| r.hypothesis.clone()).collect();
    let refs: Vec<Vec<String>> = records.iter().map(|r| r.reference.clone()).collect();
    let bleu = if records.is_empty() { 0.0 } else { bleu(&hyps, &refs)? };
    Ok(EvalReport {
        split: split.to_string(),
        bleu,
        oov_recall: if total == 0 {
            0.0
        } else {
            100.0 * hit as f64 / total as f64
        },
        examples: records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// No documents.
    Baseline,
    /// Gold entries at training and evaluation time.
    Oracle,
    /// Retrieved entries at evaluation time.
    Partial,
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Setting::Baseline),
            "oracle" => Ok(Setting::Oracle),
            "partial" => Ok(Setting::Partial),
            other => Err(Error::InvalidConfig(format!("unknown setting {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    /// Entries used while training in the partial setting (oracle or retrieved).
    pub partial_train_docs: DocMode,
    pub beam_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            partial_train_docs: DocMode::Oracle,
            beam_size: 15,
        }
    }
}

pub struct ExperimentResult<S: Scalar> {
    pub setting: Setting,
    pub outcome: TrainOutcome<S>,
    pub dev: EvalReport,
    pub test: EvalReport,
}

impl<S: Scalar> ExperimentResult<S> {
    pub fn log(&self) -> &[EpochRecord] {
        &self.outcome.log
    }
}

/// Training and evaluation document sources for a setting.
pub fn setting_sources<'a>(
    setting: Setting,
    config: &ExperimentConfig,
    documents: Option<&'a DocumentSet>,
    index: Option<&'a TfIdfIndex>,
) -> Result<(DocSource<'a>, DocSource<'a>)> {
    let k = config.train.model.k;
    let retrieved = || match (documents, index) {
        (Some(d), Some(i)) => Ok(DocSource::retrieved(k, d, i)),
        _ => Err(Error::Missing("the partial setting needs a document set and a fitted index".into())),
    };
    Ok(match setting {
        Setting::Baseline => (DocSource::none(), DocSource::none()),
        Setting::Oracle => (DocSource::oracle(k), DocSource::oracle(k)),
        Setting::Partial => {
            let eval = retrieved()?;
            let tr = match config.partial_train_docs {
                DocMode::Retrieved => eval,
                DocMode::Oracle => DocSource::oracle(k),
                DocMode::None => DocSource::none(),
            };
            (tr, eval)
        }
    })
}

/// Trains under `setting` (model selection on the training-side sources),
/// then beam-decodes dev and test with the evaluation-side sources.
pub fn run_experiment<S: Scalar>(
    dataset: &Dataset,
    manifest: &SplitManifest,
    documents: Option<&DocumentSet>,
    index: Option<&TfIdfIndex>,
    setting: Setting,
    config: &ExperimentConfig,
    log_path: Option<&Path>,
) -> Result<ExperimentResult<S>> {
    manifest.validate(dataset)?;
    let (train_src, eval_src) = setting_sources(setting, config, documents, index)?;
    let train_set = dataset.select(&manifest.train)?;
    let dev_set = dataset.select(&manifest.dev)?;
    let test_set = dataset.select(&manifest.test)?;
    let descriptions: Vec<&str> = documents
        .map(|d| d.entries().iter().map(|e| e.description.as_str()).collect())
        .unwrap_or_default();
    let mut train_config = config.train.clone();
    train_config.doc_mode = train_src.mode;
    let outcome = train::<S>(
        &train_set,
        &dev_set,
        train_src,
        train_src,
        &descriptions,
        &train_config,
        log_path,
    )?;
    let mode = SearchMode::Beam(config.beam_size);
    let dev = evaluate(&outcome.model, "dev", &dev_set, eval_src, mode)?;
    let test = evaluate(&outcome.model, "test", &test_set, eval_src, mode)?;
    Ok(ExperimentResult {
        setting,
        outcome,
        dev,
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub encoder_hidden: usize,
    pub dropout: f64,
    pub partial_train_docs: DocMode,
    pub dev_bleu: f64,
    pub dev_oov_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub hidden: Vec<usize>,
    pub dropout: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            hidden: vec![128, 256, 384],
            dropout: vec![0.3, 0.5],
        }
    }
}

/// Grid over encoder width and dropout (and, for the partial setting, the
/// training-time document source). Returns points in grid order.
pub fn sweep<S: Scalar>(
    dataset: &Dataset,
    manifest: &SplitManifest,
    documents: Option<&DocumentSet>,
    index: Option<&TfIdfIndex>,
    setting: Setting,
    base: &ExperimentConfig,
    grid: &SweepGrid,
) -> Result<Vec<SweepPoint>> {
    let doc_options: &[DocMode] = if setting == Setting::Partial {
        &[DocMode::Oracle, DocMode::Retrieved]
    } else {
        &[base.partial_train_docs]
    };
    let mut points = Vec::new();
    for &h in &grid.hidden {
        for &p in &grid.dropout {
            for &docs in doc_options {
                let mut cfg = base.clone();
                cfg.train.model.encoder_hidden = h;
                cfg.train.model.dropout = p;
                cfg.partial_train_docs = docs;
                let res = run_experiment::<S>(dataset, manifest, documents, index, setting, &cfg, None)?;
                log::info!("sweep hidden={h} dropout={p} docs={docs:?}: dev BLEU {:.2}", res.dev.bleu);
                points.push(SweepPoint {
                    encoder_hidden: h,
                    dropout: p,
                    partial_train_docs: docs,
                    dev_bleu: res.dev.bleu,
                    dev_oov_recall: res.dev.oov_recall,
                });
            }
        }
    }
    Ok(points)
}
