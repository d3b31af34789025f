use super::{Model, FUNC_TOKEN};
use crate::corpus::{tokenize_nl, tokenize_snippet, Vocabulary};
use crate::docstore::ApiEntry;
use crate::error::{Error, Result};
use crate::neural::{bilstm_encode, dropout, BiLstm, Graph, NodeId, Rng};
use crate::scalar::Scalar;

/// Replaces OOV tokens before the first `(` (all tokens when there is none)
/// with [`FUNC_TOKEN`]. The result is only used for embedding lookup.
pub fn mask_signature(tokens: &[String], vocab: &Vocabulary) -> Vec<String> {
    let paren = tokens.iter().position(|t| t == "(").unwrap_or(tokens.len());
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if i < paren && !vocab.contains(t) {
                FUNC_TOKEN.to_string()
            } else {
                t.clone()
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EncodedEntry {
    pub key: String,
    /// Surface tokens; these are the copyable symbols.
    pub tokens: Vec<String>,
    pub masked: Vec<String>,
    /// One description-aligned representation per signature token.
    pub reps: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct EncodedIntent {
    pub tokens: Vec<String>,
    pub reps: Vec<NodeId>,
    pub final_hidden: NodeId,
    pub final_cell: NodeId,
}

impl<S: Scalar> Model<S> {
    fn encode_nl(
        &self,
        g: &mut Graph<'_, S>,
        tokens: &[String],
        encoder: &BiLstm,
        mut rng: Option<&mut Rng>,
    ) -> Result<crate::neural::BiLstmOutput> {
        let inputs: Vec<NodeId> = tokens
            .iter()
            .map(|t| {
                let x = g.row(self.w.nl_embed, self.nl_vocab.id_or_unk(t));
                dropout(g, x, self.config.dropout, rng.as_deref_mut())
            })
            .collect();
        bilstm_encode(g, &inputs, encoder)
    }

    pub fn encode_intent(
        &self,
        g: &mut Graph<'_, S>,
        tokens: &[String],
        rng: Option<&mut Rng>,
    ) -> Result<EncodedIntent> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence("intent"));
        }
        let out = self.encode_nl(g, tokens, &self.w.intent_encoder, rng)?;
        Ok(EncodedIntent {
            tokens: tokens.to_vec(),
            reps: out.states,
            final_hidden: out.final_hidden,
            final_cell: out.final_cell,
        })
    }

    /// Encodes one entry; entries with an empty signature or description are
    /// skipped with a warning.
    pub fn encode_entry(
        &self,
        g: &mut Graph<'_, S>,
        entry: &ApiEntry,
        mut rng: Option<&mut Rng>,
    ) -> Result<Option<EncodedEntry>> {
        let tokens = tokenize_snippet(&entry.signature);
        let desc = tokenize_nl(&entry.description);
        if tokens.is_empty() || desc.is_empty() {
            log::warn!("skipping entry {:?}: empty signature or description", entry.key);
            return Ok(None);
        }
        let masked = mask_signature(&tokens, &self.code_vocab);
        let sig_inputs: Vec<NodeId> = masked
            .iter()
            .map(|t| {
                let id = if t == FUNC_TOKEN {
                    self.func_id()
                } else {
                    self.code_vocab.id_or_unk(t)
                };
                let x = g.row(self.w.sig_embed, id);
                dropout(g, x, self.config.dropout, rng.as_deref_mut())
            })
            .collect();
        let s = bilstm_encode(g, &sig_inputs, &self.w.sig_encoder)?;
        let d = self.encode_nl(g, &desc, &self.w.nl_encoder, rng)?;
        // alpha_ij = s_i' W d_j' = s_i' . (W d_j')
        let wd: Vec<NodeId> = d.states.iter().map(|&dj| g.matvec(self.w.att_doc, dj)).collect();
        let reps = s
            .states
            .iter()
            .map(|&si| {
                let alpha = g.dots(&wd, si);
                let a = g.softmax(alpha);
                g.weighted_sum(a, &d.states)
            })
            .collect();
        Ok(Some(EncodedEntry {
            key: entry.key.clone(),
            tokens,
            masked,
            reps,
        }))
    }
}
