use super::copy::{build_copy_index, CopyIndex};
use super::reader::{EncodedEntry, EncodedIntent};
use super::Model;
use crate::docstore::ApiEntry;
use crate::error::{Error, Result};
use crate::neural::{dropout, lstm_step, Graph, NodeId, Rng};
use crate::scalar::Scalar;

/// Magnitude floor for the selective-read normalizer in strict mode.
const STRICT_K_FLOOR: f64 = 1e-6;

/// Per-example decoding context shared by every step and hypothesis.
#[derive(Debug, Clone)]
pub struct DecoderContext {
    pub index: CopyIndex,
    /// `tanh(W_c h + b_c)` for every `h` in `H`; the copy score is its dot
    /// product with the decoder state.
    copy_keys: Vec<NodeId>,
    /// Generation row of each copy symbol that is also in the vocabulary.
    copy_gen_row: Vec<Option<usize>>,
    /// Copy symbols outside the vocabulary, in `M` order.
    copy_only: Vec<usize>,
}

impl DecoderContext {
    pub fn copy_only(&self) -> &[usize] {
        &self.copy_only
    }
}

#[derive(Debug, Clone)]
pub struct DecoderState {
    pub z: NodeId,
    pub cell: NodeId,
}

/// Normalized output distribution for one step.
///
/// Outcomes are the generation candidates (vocabulary order without PAD/BOS,
/// UNK included) followed by copy-only symbols. A symbol in both the
/// vocabulary and `M` gets the sum of both routes.
#[derive(Debug, Clone)]
pub struct StepDistribution {
    pub q_gen: Vec<f64>,
    pub q_copy: Vec<f64>,
    pub probs: Vec<f64>,
}

impl StepDistribution {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

impl<S: Scalar> Model<S> {
    /// Builds the copy index, precomputes copy keys, and returns the initial
    /// decoder state (the intent encoder's final state).
    pub fn prepare(
        &self,
        g: &mut Graph<'_, S>,
        intent: &EncodedIntent,
        entries: &[EncodedEntry],
    ) -> (DecoderContext, DecoderState) {
        let index = build_copy_index(intent, entries);
        let b = g.param(self.w.copy_b);
        let copy_keys = index
            .reps
            .iter()
            .map(|&h| {
                let wh = g.matvec(self.w.copy_w, h);
                let pre = g.add(wh, b);
                g.tanh(pre)
            })
            .collect();
        let copy_gen_row: Vec<Option<usize>> = index
            .symbols
            .iter()
            .map(|s| self.code_vocab.get(s).and_then(|id| self.gen_row(id)))
            .collect();
        let copy_only = (0..index.len()).filter(|&m| copy_gen_row[m].is_none()).collect();
        let ctx = DecoderContext {
            index,
            copy_keys,
            copy_gen_row,
            copy_only,
        };
        let state = DecoderState {
            z: intent.final_hidden,
            cell: intent.final_cell,
        };
        (ctx, state)
    }

    /// Encodes intent and entries and prepares decoding in one call.
    pub fn encode_all(
        &self,
        g: &mut Graph<'_, S>,
        intent_tokens: &[String],
        entries: &[ApiEntry],
        mut rng: Option<&mut Rng>,
    ) -> Result<(DecoderContext, DecoderState)> {
        let intent = self.encode_intent(g, intent_tokens, rng.as_deref_mut())?;
        let mut encoded = Vec::with_capacity(entries.len());
        for e in entries {
            if let Some(enc) = self.encode_entry(g, e, rng.as_deref_mut())? {
                encoded.push(enc);
            }
        }
        Ok(self.prepare(g, &intent, &encoded))
    }

    /// Attentive read `l` over all of `H` and selective read `u` over the
    /// representations of `prev_symbol`, both scored against `state.z`.
    ///
    /// Both reads use the previous state: the attentive read cannot use the
    /// state it helps produce. `u` is zero when `prev_symbol` is not in `M`.
    pub fn decoder_reads(
        &self,
        g: &mut Graph<'_, S>,
        ctx: &DecoderContext,
        state: &DecoderState,
        prev_symbol: &str,
    ) -> (NodeId, NodeId) {
        let h = &ctx.index.reps;
        let wz = g.matvec(self.w.att_dec, state.z);
        let beta = g.dots(h, wz);
        let beta = g.softmax(beta);
        let attentive = g.weighted_sum(beta, h);

        let group = ctx.index.group(prev_symbol);
        let selective = if group.is_empty() {
            g.zeros(self.config.decoder_hidden())
        } else {
            let keys: Vec<NodeId> = group.iter().map(|&j| ctx.copy_keys[j]).collect();
            let f = g.dots(&keys, state.z);
            if self.config.strict_selective_read {
                let gamma = g.div_by_sum(f, S::from_f64_lossy(STRICT_K_FLOOR));
                let gamma = g.scatter(gamma, group.to_vec(), h.len());
                let w = g.softmax(gamma);
                g.weighted_sum(w, h)
            } else {
                let w = g.softmax(f);
                let reps: Vec<NodeId> = group.iter().map(|&j| h[j]).collect();
                g.weighted_sum(w, &reps)
            }
        };
        (attentive, selective)
    }

    /// Feeds the previous symbol and advances the decoder one step.
    pub fn update_state(
        &self,
        g: &mut Graph<'_, S>,
        ctx: &DecoderContext,
        state: &DecoderState,
        prev_symbol: &str,
        rng: Option<&mut Rng>,
    ) -> Result<DecoderState> {
        let (attentive, selective) = self.decoder_reads(g, ctx, state, prev_symbol);
        let c = g.row(self.w.out_embed, self.code_vocab.id_or_unk(prev_symbol));
        let joined = g.concat(&[c, attentive, selective]);
        let proj = g.matvec(self.w.input_w, joined);
        let bias = g.param(self.w.input_bias);
        let input = g.add(proj, bias);
        let input = dropout(g, input, self.config.dropout, rng);
        let (z, cell) = lstm_step(g, input, state.z, state.cell, &self.w.decoder)?;
        Ok(DecoderState { z, cell })
    }

    /// Unnormalized scores: generation scores then one copy score per symbol in `M`.
    pub fn step_scores(&self, g: &mut Graph<'_, S>, ctx: &DecoderContext, z: NodeId) -> NodeId {
        let gen = g.matvec(self.w.gen_w, z);
        let bias = g.param(self.w.output_bias);
        let gen = g.add(gen, bias);
        if ctx.index.is_empty() {
            return gen;
        }
        let f = g.dots(&ctx.copy_keys, z);
        let psi_c = g.group_sum(f, ctx.index.groups.clone());
        g.concat(&[gen, psi_c])
    }

    pub fn step_distribution(&self, g: &mut Graph<'_, S>, ctx: &DecoderContext, z: NodeId) -> StepDistribution {
        let scores = self.step_scores(g, ctx, z);
        let values: Vec<f64> = g.value(scores).iter().map(|v| v.to_f64_lossy()).collect();
        let p = crate::neural::softmax(&values);
        let n_gen = self.gen_ids.len();
        let q_gen = p[..n_gen].to_vec();
        let q_copy = p[n_gen..].to_vec();
        let mut probs = q_gen.clone();
        for (m, row) in ctx.copy_gen_row.iter().enumerate() {
            if let Some(r) = row {
                probs[*r] += q_copy[m];
            }
        }
        probs.extend(ctx.copy_only.iter().map(|&m| q_copy[m]));
        StepDistribution { q_gen, q_copy, probs }
    }

    /// Surface symbol of outcome `i` of a [`StepDistribution`].
    pub fn outcome_symbol<'a>(&'a self, ctx: &'a DecoderContext, i: usize) -> &'a str {
        let n_gen = self.gen_ids.len();
        if i < n_gen {
            self.code_vocab.token(self.gen_ids[i])
        } else {
            &ctx.index.symbols[ctx.copy_only[i - n_gen]]
        }
    }

    /// `(q_g, q_c)` for any surface symbol. Symbols outside both the vocabulary
    /// and `M` receive UNK's generation mass.
    pub fn route_probs(&self, ctx: &DecoderContext, dist: &StepDistribution, symbol: &str) -> (f64, f64) {
        let m = ctx.index.position(symbol);
        let q_g = match self.code_vocab.get(symbol) {
            Some(id) => self.gen_row(id).map_or(0.0, |r| dist.q_gen[r]),
            None if m.is_some() => 0.0,
            None => dist.q_gen[self.gen_row(self.code_vocab.unk()).expect("UNK is generatable")],
        };
        (q_g, m.map_or(0.0, |m| dist.q_copy[m]))
    }

    /// Indices into the step scores whose mass is the probability of `gold`.
    pub fn loss_targets(&self, ctx: &DecoderContext, gold: &str) -> Vec<usize> {
        let n_gen = self.gen_ids.len();
        let copy = ctx.index.position(gold).map(|m| n_gen + m);
        match self.code_vocab.get(gold).and_then(|id| self.gen_row(id)) {
            Some(r) => std::iter::once(r).chain(copy).collect(),
            None => match copy {
                Some(c) => vec![c],
                None => vec![self.gen_row(self.code_vocab.unk()).expect("UNK is generatable")],
            },
        }
    }

    /// Teacher-forced negative log-likelihood of `snippet` followed by EOS.
    pub fn example_loss(
        &self,
        g: &mut Graph<'_, S>,
        intent_tokens: &[String],
        snippet_tokens: &[String],
        entries: &[ApiEntry],
        rng: Option<&mut Rng>,
    ) -> Result<NodeId> {
        let terms = self.example_loss_terms(g, intent_tokens, snippet_tokens, entries, rng)?;
        Ok(g.sum(&terms))
    }

    /// Per-step negative log-likelihood nodes, one per gold token plus EOS.
    pub fn example_loss_terms(
        &self,
        g: &mut Graph<'_, S>,
        intent_tokens: &[String],
        snippet_tokens: &[String],
        entries: &[ApiEntry],
        mut rng: Option<&mut Rng>,
    ) -> Result<Vec<NodeId>> {
        if snippet_tokens.is_empty() {
            return Err(Error::EmptySequence("gold snippet"));
        }
        let (ctx, mut state) = self.encode_all(g, intent_tokens, entries, rng.as_deref_mut())?;
        let eos = self.code_vocab.token(self.code_vocab.eos()).to_string();
        let bos = self.code_vocab.token(self.code_vocab.bos()).to_string();
        let mut prev: &str = &bos;
        let mut terms = Vec::with_capacity(snippet_tokens.len() + 1);
        for gold in snippet_tokens.iter().chain(std::iter::once(&eos)) {
            state = self.update_state(g, &ctx, &state, prev, rng.as_deref_mut())?;
            let scores = self.step_scores(g, &ctx, state.z);
            terms.push(g.neg_log_mass(scores, self.loss_targets(&ctx, gold)));
            prev = gold;
        }
        Ok(terms)
    }
}
