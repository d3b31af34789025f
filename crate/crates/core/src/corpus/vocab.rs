use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

const SPECIALS: [&str; 4] = [PAD, UNK, BOS, EOS];

/// Token inventory with the four specials at ids 0..4.
///
/// Regular tokens follow in frequency-descending, then lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRecord", into = "VocabRecord")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    min_freq: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabRecord {
    min_freq: usize,
    tokens: Vec<String>,
}

impl From<VocabRecord> for Vocabulary {
    fn from(r: VocabRecord) -> Self {
        Vocabulary::from_ordered(r.tokens, r.min_freq)
    }
}

impl From<Vocabulary> for VocabRecord {
    fn from(v: Vocabulary) -> Self {
        VocabRecord {
            min_freq: v.min_freq,
            tokens: v.tokens,
        }
    }
}

impl Vocabulary {
    fn from_ordered(tokens: Vec<String>, min_freq: usize) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            tokens,
            index,
            min_freq,
        }
    }

    /// Counts tokens over `sequences` and keeps those seen at least `min_freq` times.
    pub fn from_sequences<'a, I, T>(sequences: I, min_freq: usize) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = &'a String>,
    {
        if min_freq < 1 {
            return Err(Error::InvalidConfig("min_freq must be at least 1".into()));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for seq in sequences {
            for tok in seq {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_freq && !SPECIALS.contains(t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let tokens = SPECIALS
            .iter()
            .copied()
            .chain(kept.into_iter().map(|(t, _)| t))
            .map(str::to_string)
            .collect();
        Ok(Self::from_ordered(tokens, min_freq))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Id of `token`, or the UNK id.
    pub fn id_or_unk(&self, token: &str) -> usize {
        self.get(token).unwrap_or_else(|| self.unk())
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn pad(&self) -> usize {
        0
    }

    pub fn unk(&self) -> usize {
        1
    }

    pub fn bos(&self) -> usize {
        2
    }

    pub fn eos(&self) -> usize {
        3
    }

    pub fn is_special(&self, id: usize) -> bool {
        id < SPECIALS.len()
    }

    pub fn is_special_token(token: &str) -> bool {
        SPECIALS.contains(&token)
    }
}

/// Output-snippet vocabulary from tokenized training snippets.
pub fn build_vocabulary(train: &[&super::Example], min_freq: usize) -> Result<Vocabulary> {
    if train.is_empty() {
        return Err(Error::InvalidConfig(
            "cannot build a vocabulary from an empty training set".into(),
        ));
    }
    Vocabulary::from_sequences(train.iter().map(|ex| ex.snippet_tokens.iter()), min_freq)
}
