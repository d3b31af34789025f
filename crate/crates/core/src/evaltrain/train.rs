use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::bleu::bleu;
use crate::corpus::{build_vocabulary, Example, Vocabulary};
use crate::docstore::{retrieve_topk, ApiEntry, DocumentSet, TfIdfIndex};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, SearchMode};
use crate::neural::{adam_step, AdamConfig, AdamState, Gradients, Graph, Rng};
use crate::scalar::Scalar;

/// Where the entries read for each intent come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocMode {
    /// Intent only: a plain copy-augmented encoder-decoder.
    None,
    /// The gold annotated entries.
    Oracle,
    /// The retriever's top-k.
    Retrieved,
}

impl std::str::FromStr for DocMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DocMode::None),
            "oracle" => Ok(DocMode::Oracle),
            "retrieved" => Ok(DocMode::Retrieved),
            other => Err(Error::InvalidConfig(format!("unknown document mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub decoupled_decay: bool,
    pub seed: u64,
    pub doc_mode: DocMode,
    pub min_freq: usize,
    /// Cap on dev examples decoded for model selection; `None` uses all.
    pub dev_limit: Option<usize>,
    /// Write wall-clock time into the training log (breaks byte-identity).
    pub log_elapsed: bool,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 100,
            patience: 20,
            lr: 0.001,
            weight_decay: 0.01,
            decoupled_decay: true,
            seed: 1,
            doc_mode: DocMode::Oracle,
            min_freq: 1,
            dev_limit: None,
            log_elapsed: false,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Small single-CPU regime: narrow layers, a larger step size and a few
    /// epochs, with model selection on the first 50 dev examples.
    pub fn desk() -> Self {
        TrainConfig {
            batch_size: 16,
            epochs: 8,
            patience: 8,
            lr: 0.005,
            dev_limit: Some(50),
            model: ModelConfig {
                nl_embed_dim: 24,
                code_embed_dim: 24,
                output_embed_dim: 24,
                encoder_hidden: 32,
                dropout: 0.1,
                ..ModelConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 || self.patience > self.epochs {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= epochs and patience <= epochs (epochs {}, patience {})",
                self.epochs, self.patience
            )));
        }
        self.model.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            decoupled_decay: self.decoupled_decay,
            ..AdamConfig::default()
        }
    }

    /// Hex sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(bytes))
    }
}

/// Supplies the entries read for an example under a [`DocMode`].
#[derive(Clone, Copy)]
pub struct DocSource<'a> {
    pub mode: DocMode,
    pub k: usize,
    pub documents: Option<&'a DocumentSet>,
    pub index: Option<&'a TfIdfIndex>,
}

impl<'a> DocSource<'a> {
    pub fn none() -> Self {
        DocSource {
            mode: DocMode::None,
            k: 0,
            documents: None,
            index: None,
        }
    }

    pub fn oracle(k: usize) -> Self {
        DocSource {
            mode: DocMode::Oracle,
            k,
            documents: None,
            index: None,
        }
    }

    pub fn retrieved(k: usize, documents: &'a DocumentSet, index: &'a TfIdfIndex) -> Self {
        DocSource {
            mode: DocMode::Retrieved,
            k,
            documents: Some(documents),
            index: Some(index),
        }
    }

    pub fn entries(&self, example: &Example) -> Result<Vec<ApiEntry>> {
        match self.mode {
            DocMode::None => Ok(Vec::new()),
            DocMode::Oracle => {
                let mut seen = std::collections::HashSet::new();
                Ok(example
                    .apis
                    .iter()
                    .filter(|a| seen.insert(a.key()))
                    .take(self.k)
                    .map(|a| ApiEntry {
                        key: a.key(),
                        signature: a.signature.clone(),
                        description: a.description.clone(),
                        library: a.library.clone(),
                    })
                    .collect())
            }
            DocMode::Retrieved => {
                let (Some(docs), Some(index)) = (self.documents, self.index) else {
                    return Err(Error::Missing("retrieved mode needs a document set and a fitted index".into()));
                };
                let result = retrieve_topk(&example.id, &example.intent, docs, index, self.k);
                Ok(result
                    .keys()
                    .filter_map(|key| docs.get(key).cloned())
                    .collect())
            }
        }
    }

    pub fn all_entries(&self, examples: &[&Example]) -> Result<Vec<Vec<ApiEntry>>> {
        examples.iter().map(|ex| self.entries(ex)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_bleu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_secs: Option<f64>,
}

/// Patience-based early stopping on a score where higher is better.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    since_best: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            since_best: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, score: f64) -> StopDecision {
        match self.best {
            Some((_, b)) if score <= b => {
                self.since_best += 1;
                if self.since_best >= self.patience {
                    StopDecision::Stop
                } else {
                    StopDecision::Continue
                }
            }
            _ => {
                self.best = Some((epoch, score));
                self.since_best = 0;
                StopDecision::Improved
            }
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

pub struct TrainOutcome<S: Scalar> {
    /// Parameters from the best dev epoch.
    pub model: Model<S>,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_bleu: f64,
}

impl<S: Scalar> TrainOutcome<S> {
    /// Checkpoint with epoch, dev BLEU, config hash and seed attached.
    pub fn checkpoint(&self, config: &TrainConfig) -> Result<crate::neural::Checkpoint> {
        self.model.to_checkpoint(serde_json::json!({
            "epoch": self.best_epoch,
            "dev_bleu": self.best_dev_bleu,
            "config_hash": config.hash(),
            "seed": config.seed,
            "rng": "chacha8",
            "train_config": config,
        }))
    }
}

/// Natural-language vocabulary over training intents and the descriptions of
/// every entry the model may read.
pub fn build_nl_vocabulary<'a>(
    train: &[&Example],
    descriptions: impl IntoIterator<Item = &'a str>,
    min_freq: usize,
) -> Result<Vocabulary> {
    let mut seqs: Vec<Vec<String>> = train.iter().map(|ex| ex.intent_tokens()).collect();
    seqs.extend(train.iter().flat_map(|ex| ex.apis.iter().map(|a| crate::corpus::tokenize_nl(&a.description))));
    seqs.extend(descriptions.into_iter().map(crate::corpus::tokenize_nl));
    Vocabulary::from_sequences(seqs.iter(), min_freq)
}

/// Greedy-decodes `examples` and returns their corpus BLEU.
pub fn greedy_bleu<S: Scalar>(model: &Model<S>, examples: &[&Example], entries: &[Vec<ApiEntry>]) -> Result<f64> {
    let max_steps = model.config().max_decode_steps;
    let mut hyps = Vec::with_capacity(examples.len());
    for (ex, ents) in examples.iter().zip(entries) {
        hyps.push(model.decode(&ex.intent_tokens(), ents, SearchMode::Greedy, max_steps)?.tokens);
    }
    let refs: Vec<Vec<String>> = examples.iter().map(|ex| ex.snippet_tokens.clone()).collect();
    bleu(&hyps, &refs)
}

/// Mean loss and summed gradients over a batch.
pub fn batch_gradients<S: Scalar>(
    model: &Model<S>,
    batch: &[(&[String], &[String], &[ApiEntry])],
    rng: Option<&mut Rng>,
) -> Result<(f64, Gradients<S>)> {
    let mut rng = rng;
    let mut grads = Gradients::new(&model.params);
    let mut total = 0.0;
    for (intent, snippet, entries) in batch {
        let mut g = Graph::new(&model.params);
        let loss = model.example_loss(&mut g, intent, snippet, entries, rng.as_deref_mut())?;
        g.check_finite()?;
        total += g.scalar(loss).to_f64_lossy();
        g.backward(loss, &mut grads)?;
    }
    let n = batch.len().max(1);
    grads.scale(S::from_f64_lossy(1.0 / n as f64));
    Ok((total / n as f64, grads))
}

/// Trains with Adam, selects on greedy dev BLEU, and stops early.
///
/// `train_docs` and `dev_docs` supply the entries read for each example. The
/// vocabulary is built from `train`; `extra_descriptions` widens the
/// natural-language vocabulary (e.g. the whole document set).
pub fn train<S: Scalar>(
    train: &[&Example],
    dev: &[&Example],
    train_docs: DocSource<'_>,
    dev_docs: DocSource<'_>,
    extra_descriptions: &[&str],
    config: &TrainConfig,
    log_path: Option<&Path>,
) -> Result<TrainOutcome<S>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    let mut rng = Rng::new(config.seed);
    let code_vocab = build_vocabulary(train, config.min_freq)?;
    let nl_vocab = build_nl_vocabulary(train, extra_descriptions.iter().copied(), config.min_freq)?;
    let mut model: Model<S> = Model::new(config.model.clone(), nl_vocab, code_vocab, &mut rng)?;
    let mut adam = AdamState::new(&model.params, config.adam());

    let train_entries = train_docs.all_entries(train)?;
    let train_intents: Vec<Vec<String>> = train.iter().map(|ex| ex.intent_tokens()).collect();
    let dev_sel: Vec<&Example> = match config.dev_limit {
        Some(n) => dev.iter().take(n).copied().collect(),
        None => dev.to_vec(),
    };
    let dev_entries = dev_docs.all_entries(&dev_sel)?;

    let mut log_file = match log_path {
        Some(p) => Some(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => None,
    };
    let start = Instant::now();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_params = model.params.clone();
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(&[String], &[String], &[ApiEntry])> = chunk
                .iter()
                .map(|&i| {
                    (
                        train_intents[i].as_slice(),
                        train[i].snippet_tokens.as_slice(),
                        train_entries[i].as_slice(),
                    )
                })
                .collect();
            let (loss, grads) = match batch_gradients(&model, &batch, Some(&mut rng)) {
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch, batch: b }),
                other => other?,
            };
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam_step(&mut model.params, &grads, &mut adam)?;
        }
        let dev_bleu = if dev_sel.is_empty() {
            0.0
        } else {
            greedy_bleu(&model, &dev_sel, &dev_entries)?
        };
        let record = EpochRecord {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            dev_bleu,
            elapsed_secs: config.log_elapsed.then(|| start.elapsed().as_secs_f64()),
        };
        log::info!(
            "epoch {epoch}: loss {:.4}, dev BLEU {:.2}",
            record.train_loss,
            record.dev_bleu
        );
        if let Some(f) = log_file.as_mut() {
            writeln!(f, "{}", serde_json::to_string(&record)?)?;
        }
        log.push(record);
        match stopper.observe(epoch, dev_bleu) {
            StopDecision::Improved => best_params = model.params.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    if let Some(mut f) = log_file {
        f.flush()?;
    }
    let (best_epoch, best_dev_bleu) = stopper.best().expect("at least one epoch ran");
    model.params = best_params;
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        best_dev_bleu,
    })
}
