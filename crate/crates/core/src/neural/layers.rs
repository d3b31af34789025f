//! LSTM cells, bidirectional encoders, bilinear scoring and dropout on top of
//! the tape.

use super::graph::{Graph, NodeId};
use super::init;
use super::params::{ParamId, ParamStore};
use super::rng::Rng;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gate order in the stacked weights: input, forget, candidate, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmWeights {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub input_size: usize,
    pub hidden_size: usize,
}

impl LstmWeights {
    /// Registers `<name>.w_input [4H, I]`, `<name>.w_hidden [4H, H]` and
    /// `<name>.bias [4H]` with Xavier-uniform matrices, zero bias and forget-gate
    /// bias 1.
    pub fn register<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let h4 = 4 * hidden_size;
        let w_input = store.add(&format!("{name}.w_input"), init::xavier(&[h4, input_size], rng))?;
        let w_hidden = store.add(&format!("{name}.w_hidden"), init::xavier(&[h4, hidden_size], rng))?;
        let mut b = init::zeros::<S>(&[h4]);
        b.data_mut()[hidden_size..2 * hidden_size].fill(S::one());
        let bias = store.add(&format!("{name}.bias"), b)?;
        Ok(LstmWeights {
            w_input,
            w_hidden,
            bias,
            input_size,
            hidden_size,
        })
    }
}

/// One LSTM step: returns `(hidden, cell)`.
pub fn lstm_step<S: Scalar>(
    g: &mut Graph<'_, S>,
    input: NodeId,
    hidden: NodeId,
    cell: NodeId,
    w: &LstmWeights,
) -> Result<(NodeId, NodeId)> {
    let hs = w.hidden_size;
    let check = |got: usize, want: usize, what: &'static str| {
        if got == want {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                op: what,
                left: vec![got],
                right: vec![want],
            })
        }
    };
    check(g.dim(input), w.input_size, "lstm_step input")?;
    check(g.dim(hidden), hs, "lstm_step hidden")?;
    check(g.dim(cell), hs, "lstm_step cell")?;

    let xi = g.matvec(w.w_input, input);
    let hh = g.matvec(w.w_hidden, hidden);
    let b = g.param(w.bias);
    let pre = g.add(xi, hh);
    let pre = g.add(pre, b);
    let i_pre = g.slice(pre, 0, hs);
    let f_pre = g.slice(pre, hs, hs);
    let c_pre = g.slice(pre, 2 * hs, hs);
    let o_pre = g.slice(pre, 3 * hs, hs);
    let i = g.sigmoid(i_pre);
    let f = g.sigmoid(f_pre);
    let cand = g.tanh(c_pre);
    let o = g.sigmoid(o_pre);
    let keep = g.mul(f, cell);
    let write = g.mul(i, cand);
    let c = g.add(keep, write);
    let tc = g.tanh(c);
    let h = g.mul(o, tc);
    Ok((h, c))
}

/// Runs `w` over `inputs` in order (or reversed), returning per-position
/// hidden states in input order plus the final (hidden, cell).
pub fn lstm_run<S: Scalar>(
    g: &mut Graph<'_, S>,
    inputs: &[NodeId],
    w: &LstmWeights,
    reverse: bool,
) -> Result<(Vec<NodeId>, (NodeId, NodeId))> {
    let mut h = g.zeros(w.hidden_size);
    let mut c = g.zeros(w.hidden_size);
    let mut out = vec![h; inputs.len()];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..inputs.len()).rev())
    } else {
        Box::new(0..inputs.len())
    };
    for t in order {
        (h, c) = lstm_step(g, inputs[t], h, c, w)?;
        out[t] = h;
    }
    Ok((out, (h, c)))
}

/// Forward and backward weights of a single-layer bidirectional LSTM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiLstm {
    pub forward: LstmWeights,
    pub backward: LstmWeights,
}

impl BiLstm {
    pub fn register<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(BiLstm {
            forward: LstmWeights::register(store, &format!("{name}.fwd"), input_size, hidden_size, rng)?,
            backward: LstmWeights::register(store, &format!("{name}.bwd"), input_size, hidden_size, rng)?,
        })
    }

    pub fn output_size(&self) -> usize {
        self.forward.hidden_size + self.backward.hidden_size
    }
}

/// Encoded sequence: `[fwd_t ; bwd_t]` per position, and the final states
/// `[fwd_last ; bwd_first]` for hidden and cell.
#[derive(Debug, Clone)]
pub struct BiLstmOutput {
    pub states: Vec<NodeId>,
    pub final_hidden: NodeId,
    pub final_cell: NodeId,
}

pub fn bilstm_encode<S: Scalar>(
    g: &mut Graph<'_, S>,
    inputs: &[NodeId],
    w: &BiLstm,
) -> Result<BiLstmOutput> {
    if inputs.is_empty() {
        return Err(Error::EmptySequence("bilstm_encode"));
    }
    let (fwd, (fh, fc)) = lstm_run(g, inputs, &w.forward, false)?;
    let (bwd, (bh, bc)) = lstm_run(g, inputs, &w.backward, true)?;
    let states = fwd.iter().zip(&bwd).map(|(&f, &b)| g.concat(&[f, b])).collect();
    let final_hidden = g.concat(&[fh, bh]);
    let final_cell = g.concat(&[fc, bc]);
    Ok(BiLstmOutput {
        states,
        final_hidden,
        final_cell,
    })
}

/// `aᵀ W b` for `W` of shape `[|a|, |b|]`.
pub fn bilinear_score<S: Scalar>(g: &mut Graph<'_, S>, a: NodeId, w: ParamId, b: NodeId) -> Result<NodeId> {
    let shape = g.params().value(w).shape().to_vec();
    if shape.len() != 2 || shape[0] != g.dim(a) || shape[1] != g.dim(b) {
        return Err(Error::ShapeMismatch {
            op: "bilinear_score",
            left: vec![g.dim(a), g.dim(b)],
            right: shape,
        });
    }
    let wb = g.matvec(w, b);
    Ok(g.dot(a, wb))
}

/// Inverted dropout; identity when `rng` is `None` (evaluation) or rate is 0.
pub fn dropout<S: Scalar>(g: &mut Graph<'_, S>, x: NodeId, rate: f64, rng: Option<&mut Rng>) -> NodeId {
    match rng {
        Some(rng) if rate > 0.0 => {
            let keep = S::from_f64_lossy(1.0 / (1.0 - rate));
            let mask = (0..g.dim(x))
                .map(|_| if rng.bernoulli(rate) { S::zero() } else { keep })
                .collect();
            let m = g.input(mask);
            g.mul(x, m)
        }
        _ => x,
    }
}
