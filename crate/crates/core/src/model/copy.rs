use std::collections::HashMap;

use super::reader::{EncodedEntry, EncodedIntent};
use crate::corpus::Vocabulary;
use crate::neural::NodeId;

/// Copy candidates `M`, all representations `H`, and `H_m` as index lists
/// into `H`.
#[derive(Debug, Clone, Default)]
pub struct CopyIndex {
    pub symbols: Vec<String>,
    pub groups: Vec<Vec<usize>>,
    pub reps: Vec<NodeId>,
    lookup: HashMap<String, usize>,
}

impl CopyIndex {
    pub fn position(&self, symbol: &str) -> Option<usize> {
        self.lookup.get(symbol).copied()
    }

    /// Indices into `reps` for `symbol`; empty when it is not copyable.
    pub fn group(&self, symbol: &str) -> &[usize] {
        self.position(symbol).map_or(&[], |m| &self.groups[m])
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    fn push(&mut self, symbol: &str, rep: NodeId) {
        let h = self.reps.len();
        self.reps.push(rep);
        if Vocabulary::is_special_token(symbol) {
            return;
        }
        let m = match self.lookup.get(symbol) {
            Some(&m) => m,
            None => {
                self.symbols.push(symbol.to_string());
                self.groups.push(Vec::new());
                self.lookup.insert(symbol.to_string(), self.symbols.len() - 1);
                self.symbols.len() - 1
            }
        };
        self.groups[m].push(h);
    }
}

/// Symbols are matched by exact, case-sensitive surface form. Intent symbols
/// come first, then signatures in retrieval order.
pub fn build_copy_index(intent: &EncodedIntent, entries: &[EncodedEntry]) -> CopyIndex {
    let mut index = CopyIndex::default();
    for (t, &h) in intent.tokens.iter().zip(&intent.reps) {
        index.push(t, h);
    }
    for e in entries {
        for (t, &h) in e.tokens.iter().zip(&e.reps) {
            index.push(t, h);
        }
    }
    index
}
