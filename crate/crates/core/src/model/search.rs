use super::decoder::{DecoderContext, DecoderState, StepDistribution};
use super::Model;
use crate::docstore::ApiEntry;
use crate::error::{Error, Result};
use crate::neural::Graph;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Greedy,
    Beam(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Emitted symbols without EOS.
    pub tokens: Vec<String>,
    pub log_prob: f64,
    /// False when decoding stopped at the step limit.
    pub finished: bool,
}

#[derive(Clone)]
struct Hypothesis {
    tokens: Vec<String>,
    log_prob: f64,
    state: DecoderState,
}

/// Outcome indices ranked by log-probability, ties kept in outcome order.
fn ranked(dist: &StepDistribution, top: usize) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = dist.probs.iter().map(|p| p.ln()).enumerate().collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(top);
    scored
}

impl<S: Scalar> Model<S> {
    pub fn decode(
        &self,
        intent_tokens: &[String],
        entries: &[ApiEntry],
        mode: SearchMode,
        max_steps: usize,
    ) -> Result<Decoded> {
        if max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be positive".into()));
        }
        let mut g = Graph::new(&self.params);
        let (ctx, state) = self.encode_all(&mut g, intent_tokens, entries, None)?;
        match mode {
            SearchMode::Greedy => self.greedy(&mut g, &ctx, state, max_steps),
            SearchMode::Beam(0) => Err(Error::InvalidConfig("beam size must be positive".into())),
            SearchMode::Beam(k) => self.beam(&mut g, &ctx, state, k, max_steps),
        }
    }

    fn greedy(
        &self,
        g: &mut Graph<'_, S>,
        ctx: &DecoderContext,
        mut state: DecoderState,
        max_steps: usize,
    ) -> Result<Decoded> {
        let eos = self.code_vocab.token(self.code_vocab.eos());
        let mut prev = self.code_vocab.token(self.code_vocab.bos()).to_string();
        let mut out = Decoded {
            tokens: Vec::new(),
            log_prob: 0.0,
            finished: false,
        };
        for _ in 0..max_steps {
            state = self.update_state(g, ctx, &state, &prev, None)?;
            let dist = self.step_distribution(g, ctx, state.z);
            let (best, lp) = ranked(&dist, 1)[0];
            out.log_prob += lp;
            let symbol = self.outcome_symbol(ctx, best);
            if symbol == eos {
                out.finished = true;
                break;
            }
            out.tokens.push(symbol.to_string());
            prev = symbol.to_string();
        }
        g.check_finite()?;
        Ok(out)
    }

    /// Beam search. Stops when no live hypothesis can beat the best finished
    /// one (scores never increase with length) or at the step limit, then
    /// returns the best-scoring hypothesis, finished or not.
    fn beam(
        &self,
        g: &mut Graph<'_, S>,
        ctx: &DecoderContext,
        state: DecoderState,
        width: usize,
        max_steps: usize,
    ) -> Result<Decoded> {
        let eos = self.code_vocab.token(self.code_vocab.eos());
        let bos = self.code_vocab.token(self.code_vocab.bos());
        let mut alive = vec![Hypothesis {
            tokens: Vec::new(),
            log_prob: 0.0,
            state,
        }];
        let mut finished: Vec<Hypothesis> = Vec::new();
        for _ in 0..max_steps {
            let mut candidates = Vec::new();
            for (h, hyp) in alive.iter().enumerate() {
                let prev = hyp.tokens.last().map_or(bos, String::as_str);
                let next = self.update_state(g, ctx, &hyp.state, prev, None)?;
                let dist = self.step_distribution(g, ctx, next.z);
                for (o, lp) in ranked(&dist, width) {
                    if lp == f64::NEG_INFINITY {
                        continue;
                    }
                    candidates.push((hyp.log_prob + lp, h, o, next.clone()));
                }
            }
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
            candidates.truncate(width);
            let mut next_alive = Vec::with_capacity(width);
            for (score, h, o, st) in candidates {
                let symbol = self.outcome_symbol(ctx, o);
                let tokens = alive[h].tokens.clone();
                let hyp = Hypothesis {
                    tokens,
                    log_prob: score,
                    state: st,
                };
                if symbol == eos {
                    finished.push(hyp);
                } else {
                    let mut hyp = hyp;
                    hyp.tokens.push(symbol.to_string());
                    next_alive.push(hyp);
                }
            }
            alive = next_alive;
            let best_done = finished.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
            let best_alive = alive.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
            if alive.is_empty() || best_done >= best_alive {
                break;
            }
        }
        g.check_finite()?;
        // Best overall; finished hypotheses win ties, then earlier ones.
        let mut best: Option<(&Hypothesis, bool)> = None;
        for (h, done) in finished.iter().map(|h| (h, true)).chain(alive.iter().map(|h| (h, false))) {
            if best.is_none_or(|(b, _)| h.log_prob > b.log_prob) {
                best = Some((h, done));
            }
        }
        let (best, done) = best.expect("beam keeps at least one hypothesis");
        let best = best.clone();
        Ok(Decoded {
            tokens: best.tokens,
            log_prob: best.log_prob,
            finished: done,
        })
    }
}
