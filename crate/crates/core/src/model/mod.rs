//! API reader and copy-augmented decoder.
//!
//! The reader encodes each retrieved signature and aligns every signature token
//! to the encoded description. The decoder mixes generation over the snippet
//! vocabulary with copying of any symbol from the intent or the signatures.

mod copy;
mod decoder;
mod reader;
mod search;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::neural::{init, BiLstm, Checkpoint, LstmWeights, ParamId, ParamStore, Rng};
use crate::scalar::Scalar;

pub use copy::{build_copy_index, CopyIndex};
pub use decoder::{DecoderContext, DecoderState, StepDistribution};
pub use reader::{mask_signature, EncodedEntry, EncodedIntent};
pub use search::{Decoded, SearchMode};

/// Embedding-input placeholder for OOV tokens before the signature's parenthesis.
pub const FUNC_TOKEN: &str = "<func>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub nl_embed_dim: usize,
    pub code_embed_dim: usize,
    pub output_embed_dim: usize,
    pub encoder_hidden: usize,
    pub dropout: f64,
    pub beam_size: usize,
    pub max_decode_steps: usize,
    /// Entries read per intent.
    pub k: usize,
    /// Selective read normalized by the raw score sum instead of a softmax.
    pub strict_selective_read: bool,
    /// Use one natural-language encoder for descriptions and intents.
    pub share_nl_encoder: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            nl_embed_dim: 300,
            code_embed_dim: 256,
            output_embed_dim: 256,
            encoder_hidden: 256,
            dropout: 0.3,
            beam_size: 15,
            max_decode_steps: 60,
            k: 5,
            strict_selective_read: false,
            share_nl_encoder: true,
        }
    }
}

impl ModelConfig {
    /// Small dimensions for tests and quick runs.
    pub fn tiny() -> Self {
        ModelConfig {
            nl_embed_dim: 8,
            code_embed_dim: 8,
            output_embed_dim: 8,
            encoder_hidden: 6,
            dropout: 0.0,
            ..ModelConfig::default()
        }
    }

    pub fn decoder_hidden(&self) -> usize {
        2 * self.encoder_hidden
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("nl_embed_dim", self.nl_embed_dim),
            ("code_embed_dim", self.code_embed_dim),
            ("output_embed_dim", self.output_embed_dim),
            ("encoder_hidden", self.encoder_hidden),
            ("beam_size", self.beam_size),
            ("max_decode_steps", self.max_decode_steps),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Weights {
    pub nl_embed: ParamId,
    pub sig_embed: ParamId,
    pub out_embed: ParamId,
    pub nl_encoder: BiLstm,
    pub intent_encoder: BiLstm,
    pub sig_encoder: BiLstm,
    pub att_doc: ParamId,
    pub att_dec: ParamId,
    pub copy_w: ParamId,
    pub copy_b: ParamId,
    pub gen_w: ParamId,
    pub output_bias: ParamId,
    pub input_w: ParamId,
    pub input_bias: ParamId,
    pub decoder: LstmWeights,
}

impl Weights {
    fn register<S: Scalar>(
        store: &mut ParamStore<S>,
        cfg: &ModelConfig,
        nl_size: usize,
        code_size: usize,
        n_gen: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let enc = 2 * cfg.encoder_hidden;
        let dec = cfg.decoder_hidden();
        let emb = |store: &mut ParamStore<S>, name: &str, rows, cols, rng: &mut Rng| {
            store.add(name, init::uniform(&[rows, cols], 0.1, rng))
        };
        let nl_embed = emb(store, "nl_embed", nl_size, cfg.nl_embed_dim, rng)?;
        // One extra row for FUNC.
        let sig_embed = emb(store, "sig_embed", code_size + 1, cfg.code_embed_dim, rng)?;
        let out_embed = emb(store, "out_embed", code_size, cfg.output_embed_dim, rng)?;
        let nl_encoder = BiLstm::register(store, "nl_encoder", cfg.nl_embed_dim, cfg.encoder_hidden, rng)?;
        let intent_encoder = if cfg.share_nl_encoder {
            nl_encoder
        } else {
            BiLstm::register(store, "intent_encoder", cfg.nl_embed_dim, cfg.encoder_hidden, rng)?
        };
        let sig_encoder = BiLstm::register(store, "sig_encoder", cfg.code_embed_dim, cfg.encoder_hidden, rng)?;
        let att_doc = store.add("att_doc", init::xavier(&[enc, enc], rng))?;
        let att_dec = store.add("att_dec", init::xavier(&[enc, dec], rng))?;
        let copy_w = store.add("copy_w", init::xavier(&[dec, enc], rng))?;
        let copy_b = store.add("copy_b", init::zeros(&[dec]))?;
        let gen_w = store.add("gen_w", init::xavier(&[n_gen, dec], rng))?;
        let output_bias = store.add("output_bias", init::zeros(&[n_gen]))?;
        let input_w = store.add(
            "input_w",
            init::xavier(&[cfg.output_embed_dim, cfg.output_embed_dim + 2 * enc], rng),
        )?;
        let input_bias = store.add("input_bias", init::zeros(&[cfg.output_embed_dim]))?;
        let decoder = LstmWeights::register(store, "decoder", cfg.output_embed_dim, dec, rng)?;
        Ok(Weights {
            nl_embed,
            sig_embed,
            out_embed,
            nl_encoder,
            intent_encoder,
            sig_encoder,
            att_doc,
            att_dec,
            copy_w,
            copy_b,
            gen_w,
            output_bias,
            input_w,
            input_bias,
            decoder,
        })
    }
}

/// Parameters plus the vocabularies they are indexed by.
#[derive(Debug, Clone)]
pub struct Model<S: Scalar> {
    config: ModelConfig,
    nl_vocab: Vocabulary,
    code_vocab: Vocabulary,
    pub params: ParamStore<S>,
    pub(crate) w: Weights,
    /// Vocabulary ids that can be generated: everything except PAD and BOS.
    gen_ids: Vec<usize>,
    gen_row: Vec<Option<usize>>,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    config: ModelConfig,
    nl_vocab: Vocabulary,
    code_vocab: Vocabulary,
    #[serde(default)]
    extra: serde_json::Value,
}

impl<S: Scalar> Model<S> {
    pub fn new(config: ModelConfig, nl_vocab: Vocabulary, code_vocab: Vocabulary, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let gen_ids: Vec<usize> = (0..code_vocab.len())
            .filter(|&id| id != code_vocab.pad() && id != code_vocab.bos())
            .collect();
        let mut gen_row = vec![None; code_vocab.len()];
        for (row, &id) in gen_ids.iter().enumerate() {
            gen_row[id] = Some(row);
        }
        let mut params = ParamStore::new();
        let w = Weights::register(&mut params, &config, nl_vocab.len(), code_vocab.len(), gen_ids.len(), rng)?;
        Ok(Model {
            config,
            nl_vocab,
            code_vocab,
            params,
            w,
            gen_ids,
            gen_row,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn nl_vocab(&self) -> &Vocabulary {
        &self.nl_vocab
    }

    pub fn code_vocab(&self) -> &Vocabulary {
        &self.code_vocab
    }

    /// Row of the signature embedding table used for FUNC.
    pub fn func_id(&self) -> usize {
        self.code_vocab.len()
    }

    /// Vocabulary ids in generation-score order.
    pub fn gen_ids(&self) -> &[usize] {
        &self.gen_ids
    }

    /// Position of a vocabulary id in the generation scores.
    pub fn gen_row(&self, vocab_id: usize) -> Option<usize> {
        self.gen_row.get(vocab_id).copied().flatten()
    }

    pub fn param(&self, name: &str) -> Option<ParamId> {
        self.params.id(name)
    }

    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Result<Checkpoint> {
        let meta = ModelMeta {
            config: self.config.clone(),
            nl_vocab: self.nl_vocab.clone(),
            code_vocab: self.code_vocab.clone(),
            extra,
        };
        Checkpoint::new(&self.params, serde_json::to_value(meta)?)
    }

    /// Rebuilds a model; returns it with the checkpoint's extra metadata.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(Self, serde_json::Value)> {
        let meta: ModelMeta = serde_json::from_value(ckpt.meta.clone())?;
        let mut model = Model::new(meta.config, meta.nl_vocab, meta.code_vocab, &mut Rng::new(0))?;
        let loaded = ckpt.params::<S>()?;
        let same_layout = loaded.len() == model.params.len()
            && loaded
                .iter()
                .zip(model.params.iter())
                .all(|((_, a), (_, b))| a.name == b.name && a.value.shape() == b.value.shape());
        if !same_layout {
            return Err(Error::Format("checkpoint parameters do not match its model config".into()));
        }
        model.params = loaded;
        Ok((model, meta.extra))
    }
}
