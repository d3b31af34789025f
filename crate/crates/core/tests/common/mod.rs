//! Shared builders and checks for the integration and acceptance tests.
#![allow(dead_code)]

pub mod checks;
pub mod desk;

use docread_core::corpus::Vocabulary;
use docread_core::docstore::ApiEntry;
use docread_core::model::{Model, ModelConfig, SearchMode};
use docread_core::neural::*;
use docread_core::Model64;

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub fn entry(key: &str, signature: &str, description: &str) -> ApiEntry {
    ApiEntry {
        key: key.into(),
        signature: signature.into(),
        description: description.into(),
        library: "thirdparty:np".into(),
    }
}

/// Snippet vocabulary used by the toy models.
pub fn toy_code_vocab() -> Vocabulary {
    let snippets = [
        toks("sorted ( x )"),
        toks("len ( x )"),
        toks("x . sort ( )"),
        toks("sorted ( x , key = len )"),
        toks("list ( x ) [ 0 ]"),
    ];
    Vocabulary::from_sequences(snippets.iter(), 1).unwrap()
}

pub fn toy_nl_vocab() -> Vocabulary {
    let text = [
        toks("sort the list x by length"),
        toks("count items in x"),
        toks("returns the indices that would sort an array"),
        toks("first element of x"),
    ];
    Vocabulary::from_sequences(text.iter(), 1).unwrap()
}

pub fn toy_model(seed: u64, config: ModelConfig) -> Model64 {
    Model::new(config, toy_nl_vocab(), toy_code_vocab(), &mut Rng::new(seed)).unwrap()
}

/// Replaces every parameter with uniform(-scale, scale) noise.
pub fn randomize(model: &mut Model64, scale: f64, rng: &mut Rng) {
    let ids: Vec<ParamId> = model.params.iter().map(|(id, _)| id).collect();
    for id in ids {
        for v in model.params.get_mut(id).value.data_mut() {
            *v = rng.uniform(-scale, scale);
        }
    }
}

pub fn toy_entries() -> Vec<ApiEntry> {
    vec![
        entry(
            "np.argsort",
            "np.argsort(a, axis=-1)",
            "Returns the indices that would sort an array.",
        ),
        entry("np.take", "np.take(a, indices)", "Take elements from an array along an axis."),
    ]
}

/// Gold snippet mixing copy-only (np, argsort), both-route (`(`, x, ...),
/// generation-only (len) and unreachable (foo, scored as UNK) targets.
pub fn toy_gold() -> (Vec<String>, Vec<String>) {
    (
        toks("sort the list x by length"),
        toks("np . argsort ( len ( x ) ) foo"),
    )
}

/// Max relative gradient error of the summed loss over two toy examples.
///
/// The probe loss subtracts each step's value at the unperturbed point, so
/// finite differences see roundoff at the scale of one step, not the total.
pub fn model_gradcheck(config: ModelConfig, seed: u64) -> f64 {
    let mut model = toy_model(seed, config);
    randomize(&mut model, 1.0, &mut Rng::new(seed + 100));
    let (intent, gold) = toy_gold();
    let batch: Vec<(Vec<String>, Vec<String>, Vec<ApiEntry>)> = vec![
        (intent, gold, toy_entries()),
        (toks("count items in x"), toks("len ( x )"), Vec::new()),
    ];
    let terms_of = |ps: &ParamStore<f64>| -> Vec<f64> {
        let mut out = Vec::new();
        for (i, s, e) in &batch {
            let mut g = Graph::new(ps);
            let terms = model.example_loss_terms(&mut g, i, s, e, None).unwrap();
            out.extend(terms.iter().map(|&n| g.scalar(n)));
        }
        out
    };
    let base = terms_of(&model.params);
    let loss_of = |ps: &ParamStore<f64>| -> f64 {
        terms_of(ps).iter().zip(&base).map(|(t, b)| t - b).sum()
    };
    let mut ps = model.params.clone();
    let mut grads = Gradients::new(&ps);
    for (i, s, e) in &batch {
        let mut g = Graph::new(&ps);
        let l = model.example_loss(&mut g, i, s, e, None).unwrap();
        g.backward(l, &mut grads).unwrap();
    }
    grad_check(&mut ps, &grads, loss_of, 1e-5, 200, &mut Rng::new(seed)).max_rel_error
}

struct LayerCtx {
    lstm: LstmWeights,
    bi: BiLstm,
    wb: ParamId,
    x: ParamId,
    v: ParamId,
    wm: ParamId,
}

type Build = fn(&mut Graph<'_, f64>, &LayerCtx) -> NodeId;

fn layer_cases() -> Vec<(&'static str, Build)> {
    vec![
        ("lstm_step", |g, c| {
            let x = g.row(c.x, 0);
            let h = g.input(vec![0.1, -0.3, 0.2, 0.5]);
            let cell = g.input(vec![-0.4, 0.3, 0.8, -0.1]);
            let (h2, c2) = lstm_step(g, x, h, cell, &c.lstm).unwrap();
            let s = g.dot(h2, c2);
            let t = g.dot(h2, h2);
            g.sum(&[s, t])
        }),
        ("bilstm_encode", |g, c| {
            let xs: Vec<NodeId> = (0..3).map(|r| g.row(c.x, r)).collect();
            let out = bilstm_encode(g, &xs, &c.bi).unwrap();
            let w = g.input(vec![0.3, -0.2, 0.5, 0.7]);
            let mut parts: Vec<NodeId> = out.states.iter().map(|&s| g.dot(s, w)).collect();
            parts.push(g.dot(out.final_hidden, out.final_cell));
            g.sum(&parts)
        }),
        ("bilinear_score", |g, c| {
            let a = g.input(vec![0.2, -0.5, 0.9, 0.1]);
            let b = g.param(c.v);
            let s = bilinear_score(g, a, c.wb, b).unwrap();
            g.tanh(s)
        }),
        ("softmax_attention", |g, c| {
            let rows: Vec<NodeId> = (0..3).map(|r| g.row(c.x, r)).collect();
            let q = g.input(vec![0.7, -0.4, 0.3]);
            let sc = g.dots(&rows, q);
            let a = g.softmax(sc);
            let ctx = g.weighted_sum(a, &rows);
            let w = g.input(vec![1.0, 2.0, -1.0]);
            g.dot(ctx, w)
        }),
        ("copy_scores_nll", |g, c| {
            let v = g.param(c.v);
            let mv = g.matvec(c.wm, v);
            let keys = g.tanh(mv);
            let scored = g.group_sum(keys, vec![vec![0, 2], vec![1], vec![3, 0]]);
            let both = g.concat(&[v, scored]);
            g.neg_log_mass(both, vec![1, 6])
        }),
        ("strict_selective_read", |g, c| {
            let rows: Vec<NodeId> = (0..3).map(|r| g.row(c.x, r)).collect();
            let v = g.param(c.v);
            let q = g.slice(v, 0, 3);
            let f = g.dots(&rows[..2], q);
            let offset = g.input(vec![3.0, 3.0]);
            let shifted = g.add(f, offset);
            let gamma = g.div_by_sum(shifted, 1e-6);
            let gamma = g.scatter(gamma, vec![0, 2], 3);
            let w = g.softmax(gamma);
            let u = g.weighted_sum(w, &rows);
            let m = g.mul(u, u);
            let e = g.input(vec![1.0, 1.0, 1.0]);
            let s = g.dot(m, e);
            let sg = g.sigmoid(s);
            g.scale(sg, 0.5)
        }),
    ]
}

/// Per-layer max relative gradient error.
pub fn layer_gradchecks(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = Rng::new(seed);
    let mut ps = ParamStore::<f64>::new();
    let ctx = LayerCtx {
        lstm: LstmWeights::register(&mut ps, "lstm", 3, 4, &mut rng).unwrap(),
        bi: BiLstm::register(&mut ps, "bi", 3, 2, &mut rng).unwrap(),
        wb: ps.add("bilinear", init::uniform(&[4, 5], 1.0, &mut rng)).unwrap(),
        x: ps.add("x", init::uniform(&[3, 3], 1.0, &mut rng)).unwrap(),
        v: ps.add("v", init::uniform(&[5], 1.0, &mut rng)).unwrap(),
        wm: ps.add("wm", init::uniform(&[4, 5], 1.0, &mut rng)).unwrap(),
    };
    let mut out = Vec::new();
    for (name, build) in layer_cases() {
        let mut grads = Gradients::new(&ps);
        {
            let mut g = Graph::new(&ps);
            let l = build(&mut g, &ctx);
            g.backward(l, &mut grads).unwrap();
        }
        let report = grad_check(
            &mut ps,
            &grads,
            |p| {
                let mut g = Graph::new(p);
                let l = build(&mut g, &ctx);
                g.scalar(l)
            },
            1e-5,
            200,
            &mut Rng::new(seed),
        );
        out.push((name, report.max_rel_error));
    }
    out
}

/// Random model with a random subset of the toy entries.
pub fn random_decoding_case(seed: u64) -> (Model64, Vec<String>, Vec<ApiEntry>) {
    let mut rng = Rng::new(seed);
    let config = ModelConfig {
        max_decode_steps: 12,
        ..ModelConfig::tiny()
    };
    let mut model = toy_model(seed, config);
    randomize(&mut model, 0.8, &mut rng);
    let intents = ["sort the list x by length", "count items in x", "first element of x"];
    let intent = toks(intents[rng.below(intents.len())]);
    let all = toy_entries();
    let n = rng.below(all.len() + 1);
    (model, intent, all[..n].to_vec())
}

/// `(greedy tokens, beam-1 tokens, greedy log-prob, beam-1 log-prob)`.
pub fn greedy_and_beam1(seed: u64) -> (Vec<String>, Vec<String>, f64, f64) {
    let (model, intent, entries) = random_decoding_case(seed);
    let steps = model.config().max_decode_steps;
    let g = model.decode(&intent, &entries, SearchMode::Greedy, steps).unwrap();
    let b = model.decode(&intent, &entries, SearchMode::Beam(1), steps).unwrap();
    (g.tokens, b.tokens, g.log_prob, b.log_prob)
}

/// Every symbol the model can emit for this input: generation candidates
/// followed by copy-only symbols.
pub fn emittable_symbols(model: &Model64, intent: &[String], entries: &[ApiEntry]) -> Vec<String> {
    let mut g = Graph::new(&model.params);
    let (ctx, _) = model.encode_all(&mut g, intent, entries, None).unwrap();
    (0..model.gen_ids().len() + ctx.copy_only().len())
        .map(|i| model.outcome_symbol(&ctx, i).to_string())
        .collect()
}

/// One random draw of parameters, entries, previous symbol and step count.
/// Checks that the step distribution sums to 1 within 1e-9 and that every
/// symbol's route split follows the vocabulary/copy-set case analysis exactly.
pub fn normalization_draw(seed: u64) -> Result<(), String> {
    let (model, intent, entries) = random_decoding_case(seed);
    let mut rng = Rng::new(seed ^ 0x5eed);
    let mut g = Graph::new(&model.params);
    let (ctx, mut state) = model.encode_all(&mut g, &intent, &entries, None).unwrap();
    let vocab = model.code_vocab();
    let mut pool: Vec<String> = vocab.tokens().to_vec();
    pool.extend(ctx.index.symbols.iter().cloned());
    pool.push("never_seen_symbol".into());
    let steps = 1 + rng.below(3);
    for _ in 0..steps {
        let prev = pool[rng.below(pool.len())].clone();
        state = model.update_state(&mut g, &ctx, &state, &prev, None).unwrap();
    }
    let dist = model.step_distribution(&mut g, &ctx, state.z);
    let total = dist.total();
    if (total - 1.0).abs() > 1e-9 {
        return Err(format!("seed {seed}: total {total}"));
    }
    let n_gen = model.gen_ids().len();
    let unk_row = model.gen_row(vocab.unk()).unwrap();
    for sym in &pool {
        let (q_g, q_c) = model.route_probs(&ctx, &dist, sym);
        let row = vocab.get(sym).and_then(|id| model.gen_row(id));
        let m = ctx.index.position(sym);
        let ok = match (row, m) {
            (Some(r), Some(m)) => {
                q_g == dist.q_gen[r] && q_c == dist.q_copy[m] && dist.probs[r] == q_g + q_c
            }
            (Some(r), None) => q_g == dist.q_gen[r] && q_c == 0.0 && dist.probs[r] == q_g,
            (None, Some(m)) => {
                let slot = ctx.copy_only().iter().position(|&c| c == m);
                q_g == 0.0
                    && q_c == dist.q_copy[m]
                    && slot.is_some_and(|s| dist.probs[n_gen + s] == q_c && q_c > 0.0)
            }
            // PAD/BOS are never emitted; anything else outside V and M is UNK.
            (None, None) if Vocabulary::is_special_token(sym) => q_c == 0.0,
            (None, None) => q_g == dist.q_gen[unk_row] && q_c == 0.0,
        };
        if !ok {
            return Err(format!("seed {seed}: case split violated for {sym:?}: ({q_g}, {q_c})"));
        }
    }
    Ok(())
}
