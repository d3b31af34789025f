//! Reverse-mode automatic differentiation over a recorded tape of vector ops.
//!
//! Every node holds a flat vector value. Parameters are referenced in place
//! (no copies of weight matrices enter the tape); their gradients are written
//! into a [`Gradients`] buffer by [`Graph::backward`].

use super::params::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(u32);

impl NodeId {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
enum Op<S> {
    Input,
    Param(ParamId),
    Row(ParamId, usize),
    MatVec(ParamId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, S),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(Vec<NodeId>),
    Slice(NodeId, usize),
    Dot(NodeId, NodeId),
    Dots(Vec<NodeId>, NodeId),
    WeightedSum(NodeId, Vec<NodeId>),
    Softmax(NodeId),
    GroupSum(NodeId, Vec<Vec<usize>>),
    Scatter(NodeId, Vec<usize>),
    DivSum(NodeId, S),
    Sum(Vec<NodeId>),
    NegLogMass(NodeId, Vec<usize>),
}

#[derive(Debug, Clone)]
struct Node<S> {
    value: Vec<S>,
    op: Op<S>,
}

pub struct Graph<'p, S: Scalar> {
    params: &'p ParamStore<S>,
    nodes: Vec<Node<S>>,
    non_finite: Option<NodeId>,
}

fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

fn log_sum_exp<S: Scalar>(xs: impl Iterator<Item = S> + Clone) -> S {
    let max = xs.clone().fold(S::neg_infinity(), S::max);
    if max == S::neg_infinity() {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<S>().ln()
}

/// Max-subtracted softmax.
pub fn softmax<S: Scalar>(xs: &[S]) -> Vec<S> {
    let max = xs.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = xs.iter().map(|&x| (x - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (x, y)| acc + *x * *y)
}

impl<'p, S: Scalar> Graph<'p, S> {
    pub fn new(params: &'p ParamStore<S>) -> Self {
        Graph {
            params,
            nodes: Vec::with_capacity(1024),
            non_finite: None,
        }
    }

    pub fn params(&self) -> &'p ParamStore<S> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<S>, op: Op<S>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        if self.non_finite.is_none() && !value.iter().all(|v| v.is_finite()) {
            self.non_finite = Some(id);
        }
        self.nodes.push(Node { value, op });
        id
    }

    pub fn value(&self, id: NodeId) -> &[S] {
        &self.nodes[id.idx()].value
    }

    pub fn scalar(&self, id: NodeId) -> S {
        self.nodes[id.idx()].value[0]
    }

    pub fn dim(&self, id: NodeId) -> usize {
        self.nodes[id.idx()].value.len()
    }

    /// Fails if any node so far produced NaN or infinity.
    pub fn check_finite(&self) -> Result<()> {
        match self.non_finite {
            None => Ok(()),
            Some(id) => Err(Error::NonFinite(format!(
                "{:?} (node {})",
                std::mem::discriminant(&self.nodes[id.idx()].op),
                id.0
            ))),
        }
    }

    pub fn input(&mut self, value: Vec<S>) -> NodeId {
        self.push(value, Op::Input)
    }

    pub fn zeros(&mut self, n: usize) -> NodeId {
        self.input(vec![S::zero(); n])
    }

    pub fn param(&mut self, p: ParamId) -> NodeId {
        let value = self.params.value(p).data().to_vec();
        self.push(value, Op::Param(p))
    }

    /// One row of a matrix parameter (embedding lookup).
    pub fn row(&mut self, p: ParamId, r: usize) -> NodeId {
        let value = self.params.value(p).row(r).to_vec();
        self.push(value, Op::Row(p, r))
    }

    /// `W x` for a `[rows, cols]` parameter.
    pub fn matvec(&mut self, w: ParamId, x: NodeId) -> NodeId {
        let wt = self.params.value(w);
        let (rows, cols) = wt.dims2();
        let xv = self.value(x);
        assert_eq!(cols, xv.len(), "matvec: {:?} x [{}]", wt.shape(), xv.len());
        let data = wt.data();
        let value = (0..rows).map(|r| dot(&data[r * cols..(r + 1) * cols], xv)).collect();
        self.push(value, Op::MatVec(w, x))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "add: length mismatch");
        let value = av.iter().zip(bv).map(|(x, y)| *x + *y).collect();
        self.push(value, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "mul: length mismatch");
        let value = av.iter().zip(bv).map(|(x, y)| *x * *y).collect();
        self.push(value, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, factor: S) -> NodeId {
        let value = self.value(a).iter().map(|x| *x * factor).collect();
        self.push(value, Op::Scale(a, factor))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).iter().map(|x| x.tanh()).collect();
        self.push(value, Op::Tanh(a))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let value = parts.iter().flat_map(|&p| self.value(p).iter().copied()).collect();
        self.push(value, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let value = self.value(a)[start..start + len].to_vec();
        self.push(value, Op::Slice(a, start))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "dot: length mismatch");
        let value = vec![dot(av, bv)];
        self.push(value, Op::Dot(a, b))
    }

    /// Vector of `row_i · v`.
    pub fn dots(&mut self, rows: &[NodeId], v: NodeId) -> NodeId {
        let vv = self.value(v);
        let value = rows.iter().map(|&r| dot(self.value(r), vv)).collect();
        self.push(value, Op::Dots(rows.to_vec(), v))
    }

    /// `Σ_i weights[i] · rows[i]`.
    pub fn weighted_sum(&mut self, weights: NodeId, rows: &[NodeId]) -> NodeId {
        let w = self.value(weights);
        assert_eq!(w.len(), rows.len(), "weighted_sum: weight count");
        assert!(!rows.is_empty(), "weighted_sum over nothing");
        let mut value = vec![S::zero(); self.dim(rows[0])];
        for (wi, &r) in w.iter().zip(rows) {
            for (acc, x) in value.iter_mut().zip(self.value(r)) {
                *acc += *wi * *x;
            }
        }
        self.push(value, Op::WeightedSum(weights, rows.to_vec()))
    }

    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let value = softmax(self.value(a));
        self.push(value, Op::Softmax(a))
    }

    /// Output `g` is the sum of the input entries listed in `groups[g]`.
    pub fn group_sum(&mut self, a: NodeId, groups: Vec<Vec<usize>>) -> NodeId {
        let av = self.value(a);
        let value = groups
            .iter()
            .map(|g| g.iter().map(|&i| av[i]).sum())
            .collect();
        self.push(value, Op::GroupSum(a, groups))
    }

    /// Places input entry `i` at `positions[i]` of a zero vector of length `len`.
    pub fn scatter(&mut self, a: NodeId, positions: Vec<usize>, len: usize) -> NodeId {
        let mut value = vec![S::zero(); len];
        for (&p, &x) in positions.iter().zip(self.value(a)) {
            value[p] = x;
        }
        self.push(value, Op::Scatter(a, positions))
    }

    /// `x / K` with `K = Σ x`; when `|K| < floor` the divisor is `±floor`
    /// (sign of K, positive for zero) and treated as a constant.
    pub fn div_by_sum(&mut self, a: NodeId, floor: S) -> NodeId {
        let av = self.value(a);
        let k: S = av.iter().copied().sum();
        let denom = if k.abs() < floor {
            if k < S::zero() {
                -floor
            } else {
                floor
            }
        } else {
            k
        };
        let value = av.iter().map(|x| *x / denom).collect();
        self.push(value, Op::DivSum(a, floor))
    }

    /// Elementwise sum of equal-length nodes.
    pub fn sum(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "sum over nothing");
        let mut value = self.value(parts[0]).to_vec();
        for &p in &parts[1..] {
            for (acc, x) in value.iter_mut().zip(self.value(p)) {
                *acc += *x;
            }
        }
        self.push(value, Op::Sum(parts.to_vec()))
    }

    /// `−ln(Σ_{i∈targets} softmax(scores)_i)`, computed stably.
    pub fn neg_log_mass(&mut self, scores: NodeId, targets: Vec<usize>) -> NodeId {
        let sv = self.value(scores);
        assert!(!targets.is_empty(), "neg_log_mass needs a target");
        let all = log_sum_exp(sv.iter().copied());
        let picked = log_sum_exp(targets.iter().map(|&i| sv[i]));
        self.push(vec![all - picked], Op::NegLogMass(scores, targets))
    }

    /// Accumulates d(output)/d(param) into `grads`. `output` must be scalar.
    pub fn backward(&self, output: NodeId, grads: &mut Gradients<S>) -> Result<()> {
        self.check_finite()?;
        assert_eq!(self.dim(output), 1, "backward from a non-scalar node");
        let mut adj: Vec<Option<Vec<S>>> = vec![None; output.idx() + 1];
        adj[output.idx()] = Some(vec![S::one()]);

        fn acc<S: Scalar>(adj: &mut [Option<Vec<S>>], node: NodeId, len: usize) -> &mut Vec<S> {
            adj[node.idx()].get_or_insert_with(|| vec![S::zero(); len])
        }

        for idx in (0..=output.idx()).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    let buf = grads.buffer(*p, g.len());
                    buf.iter_mut().zip(&g).for_each(|(b, gi)| *b += *gi);
                }
                Op::Row(p, r) => {
                    let t = self.params.value(*p);
                    let (_, cols) = t.dims2();
                    let buf = grads.buffer(*p, t.len());
                    buf[r * cols..(r + 1) * cols]
                        .iter_mut()
                        .zip(&g)
                        .for_each(|(b, gi)| *b += *gi);
                }
                Op::MatVec(w, x) => {
                    let t = self.params.value(*w);
                    let (rows, cols) = t.dims2();
                    let xv = self.value(*x);
                    let buf = grads.buffer(*w, t.len());
                    for r in 0..rows {
                        let gr = g[r];
                        if gr == S::zero() {
                            continue;
                        }
                        for (b, xi) in buf[r * cols..(r + 1) * cols].iter_mut().zip(xv) {
                            *b += gr * *xi;
                        }
                    }
                    let data = t.data();
                    let dx = acc(&mut adj, *x, cols);
                    for r in 0..rows {
                        let gr = g[r];
                        if gr == S::zero() {
                            continue;
                        }
                        for (d, wv) in dx.iter_mut().zip(&data[r * cols..(r + 1) * cols]) {
                            *d += gr * *wv;
                        }
                    }
                }
                Op::Add(a, b) => {
                    for n in [*a, *b] {
                        let d = acc(&mut adj, n, g.len());
                        d.iter_mut().zip(&g).for_each(|(d, gi)| *d += *gi);
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let da = acc(&mut adj, *a, g.len());
                    for i in 0..g.len() {
                        da[i] += g[i] * bv[i];
                    }
                    let db = acc(&mut adj, *b, g.len());
                    for i in 0..g.len() {
                        db[i] += g[i] * av[i];
                    }
                }
                Op::Scale(a, f) => {
                    let d = acc(&mut adj, *a, g.len());
                    d.iter_mut().zip(&g).for_each(|(d, gi)| *d += *gi * *f);
                }
                Op::Sigmoid(a) => {
                    let d = acc(&mut adj, *a, g.len());
                    for i in 0..g.len() {
                        d[i] += g[i] * y[i] * (S::one() - y[i]);
                    }
                }
                Op::Tanh(a) => {
                    let d = acc(&mut adj, *a, g.len());
                    for i in 0..g.len() {
                        d[i] += g[i] * (S::one() - y[i] * y[i]);
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.dim(p);
                        let d = acc(&mut adj, p, n);
                        d.iter_mut().zip(&g[offset..offset + n]).for_each(|(d, gi)| *d += *gi);
                        offset += n;
                    }
                }
                Op::Slice(a, start) => {
                    let n = self.dim(*a);
                    let d = acc(&mut adj, *a, n);
                    d[*start..*start + g.len()]
                        .iter_mut()
                        .zip(&g)
                        .for_each(|(d, gi)| *d += *gi);
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let da = acc(&mut adj, *a, av.len());
                    da.iter_mut().zip(bv).for_each(|(d, x)| *d += g[0] * *x);
                    let db = acc(&mut adj, *b, bv.len());
                    db.iter_mut().zip(av).for_each(|(d, x)| *d += g[0] * *x);
                }
                Op::Dots(rows, v) => {
                    let vv = self.value(*v);
                    let mut dv = vec![S::zero(); vv.len()];
                    for (i, &r) in rows.iter().enumerate() {
                        let gi = g[i];
                        let rv = self.value(r);
                        for (d, x) in dv.iter_mut().zip(rv) {
                            *d += gi * *x;
                        }
                        let dr = acc(&mut adj, r, vv.len());
                        dr.iter_mut().zip(vv).for_each(|(d, x)| *d += gi * *x);
                    }
                    let d = acc(&mut adj, *v, vv.len());
                    d.iter_mut().zip(&dv).for_each(|(d, x)| *d += *x);
                }
                Op::WeightedSum(weights, rows) => {
                    let w = self.value(*weights);
                    let mut dw = vec![S::zero(); w.len()];
                    for (i, &r) in rows.iter().enumerate() {
                        dw[i] = dot(self.value(r), &g);
                        let dr = acc(&mut adj, r, g.len());
                        dr.iter_mut().zip(&g).for_each(|(d, gi)| *d += w[i] * *gi);
                    }
                    let d = acc(&mut adj, *weights, w.len());
                    d.iter_mut().zip(&dw).for_each(|(d, x)| *d += *x);
                }
                Op::Softmax(a) => {
                    let gy = dot(&g, y);
                    let d = acc(&mut adj, *a, g.len());
                    for i in 0..g.len() {
                        d[i] += y[i] * (g[i] - gy);
                    }
                }
                Op::GroupSum(a, groups) => {
                    let n = self.dim(*a);
                    let d = acc(&mut adj, *a, n);
                    for (gi, members) in g.iter().zip(groups) {
                        for &m in members {
                            d[m] += *gi;
                        }
                    }
                }
                Op::Scatter(a, positions) => {
                    let n = self.dim(*a);
                    let d = acc(&mut adj, *a, n);
                    for (i, &p) in positions.iter().enumerate() {
                        d[i] += g[p];
                    }
                }
                Op::DivSum(a, floor) => {
                    let av = self.value(*a);
                    let k: S = av.iter().copied().sum();
                    let d = acc(&mut adj, *a, av.len());
                    if k.abs() < *floor {
                        let denom = if k < S::zero() { -*floor } else { *floor };
                        d.iter_mut().zip(&g).for_each(|(d, gi)| *d += *gi / denom);
                    } else {
                        let gx = dot(&g, av);
                        for i in 0..av.len() {
                            d[i] += g[i] / k - gx / (k * k);
                        }
                    }
                }
                Op::Sum(parts) => {
                    for &p in parts {
                        let d = acc(&mut adj, p, g.len());
                        d.iter_mut().zip(&g).for_each(|(d, gi)| *d += *gi);
                    }
                }
                Op::NegLogMass(scores, targets) => {
                    let sv = self.value(*scores);
                    let all = softmax(sv);
                    let picked: Vec<S> = targets.iter().map(|&i| sv[i]).collect();
                    let part = softmax(&picked);
                    let d = acc(&mut adj, *scores, sv.len());
                    for (i, p) in all.iter().enumerate() {
                        d[i] += g[0] * *p;
                    }
                    for (&t, p) in targets.iter().zip(&part) {
                        d[t] -= g[0] * *p;
                    }
                }
            }
        }
        Ok(())
    }
}
