//! Tape-based reverse-mode differentiation over the handful of operations the
//! model needs.
//!
//! Nodes are appended in evaluation order, so every input of a node has a
//! smaller id and the backward pass is a single reverse sweep. Parameter
//! nodes read their values from a borrowed [`ParamStore`] and their
//! gradients are collected into a [`Gradients`] aligned with that store.

use std::collections::HashMap;

use super::kernels::{self, LstmStep};
use super::store::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Probability floor used by the likelihood losses.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Const,
    Param(usize),
    Embed { table: NodeId, row: usize },
    Lstm { x: NodeId, state: Option<NodeId>, w_ih: NodeId, w_hh: NodeId, bias: NodeId, step: Box<LstmStep> },
    Slice { x: NodeId, start: usize },
    Concat(Vec<NodeId>),
    Linear { w: NodeId, x: NodeId, bias: Option<NodeId> },
    MatVecT { m: NodeId, x: NodeId },
    Add(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softmax(NodeId),
    Dot(NodeId, NodeId),
    WeightedSum { weights: NodeId, rows: Vec<NodeId> },
    Mask { x: NodeId, mask: Vec<f64> },
    Nll { probs: NodeId, target: usize },
    Bce { prob: NodeId, target: bool },
    Sum(Vec<NodeId>),
    Scale { x: NodeId, k: f64 },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    shape: Vec<usize>,
    op: Op,
}

pub struct Graph<'s> {
    store: Option<&'s ParamStore>,
    nodes: Vec<Node>,
    param_nodes: HashMap<usize, NodeId>,
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store: Some(store),
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    /// A graph with no parameter store; only constants can be leaves.
    pub fn detached() -> Self {
        Self {
            store: None,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        let shape = vec![value.len()];
        self.push_shaped(value, shape, op)
    }

    fn push_shaped(&mut self, value: Vec<f64>, shape: Vec<usize>, op: Op) -> NodeId {
        self.nodes.push(Node { value, shape, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        match self.nodes[id.0].op {
            Op::Param(idx) => &self.store.expect("param node without store").tensor(idx).data,
            _ => &self.nodes[id.0].value,
        }
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id)[0]
    }

    fn dim(&self, id: NodeId) -> usize {
        self.value(id).len()
    }

    fn matrix_dims(&self, id: NodeId, what: &str) -> Result<(usize, usize)> {
        match self.shape(id) {
            [r, c] => Ok((*r, *c)),
            other => Err(Error::Dimension(format!("{what} must be a matrix, got shape {other:?}"))),
        }
    }

    fn same_len(&self, a: NodeId, b: NodeId, what: &str) -> Result<usize> {
        let (la, lb) = (self.dim(a), self.dim(b));
        if la != lb {
            return Err(Error::Dimension(format!("{what}: operand lengths {la} and {lb} differ")));
        }
        Ok(la)
    }

    pub fn constant(&mut self, tensor: Tensor) -> NodeId {
        self.push_shaped(tensor.data, tensor.shape, Op::Const)
    }

    pub fn vector(&mut self, data: Vec<f64>) -> NodeId {
        self.push(data, Op::Const)
    }

    /// Leaf for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, name: &str) -> Result<NodeId> {
        let store = self
            .store
            .ok_or_else(|| Error::InvalidArgument("graph has no parameter store".into()))?;
        let idx = store
            .index_of(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter `{name}`")))?;
        if let Some(id) = self.param_nodes.get(&idx) {
            return Ok(*id);
        }
        let shape = store.tensor(idx).shape.clone();
        let id = self.push_shaped(Vec::new(), shape, Op::Param(idx));
        self.param_nodes.insert(idx, id);
        Ok(id)
    }

    /// Row `row` of a `[rows, dim]` embedding table.
    pub fn embed(&mut self, table: NodeId, row: usize) -> Result<NodeId> {
        let (rows, dim) = self.matrix_dims(table, "embedding table")?;
        if row >= rows {
            return Err(Error::Dimension(format!("embedding row {row} outside table of {rows} rows")));
        }
        let value = self.value(table)[row * dim..(row + 1) * dim].to_vec();
        Ok(self.push(value, Op::Embed { table, row }))
    }

    /// One LSTM step. `state` is the `[h; c]` output of the previous step, or
    /// `None` for the zero state. The result is the new `[h; c]`.
    pub fn lstm_step(&mut self, x: NodeId, state: Option<NodeId>, w_ih: NodeId, w_hh: NodeId, bias: NodeId) -> Result<NodeId> {
        let (rows, in_dim) = self.matrix_dims(w_ih, "LSTM input weights")?;
        if rows % 4 != 0 {
            return Err(Error::Dimension(format!("LSTM weights have {rows} rows, not a multiple of 4")));
        }
        let hidden = rows / 4;
        if self.matrix_dims(w_hh, "LSTM recurrent weights")? != (4 * hidden, hidden) || self.dim(bias) != 4 * hidden {
            return Err(Error::Dimension("LSTM recurrent weights or bias do not match the hidden size".into()));
        }
        if self.dim(x) != in_dim {
            return Err(Error::Dimension(format!("LSTM input has {} values, expected {in_dim}", self.dim(x))));
        }
        let zeros = vec![0.0; 2 * hidden];
        let prev = match state {
            Some(s) if self.dim(s) == 2 * hidden => self.value(s),
            Some(s) => {
                return Err(Error::Dimension(format!(
                    "LSTM state has {} values, expected {}",
                    self.dim(s),
                    2 * hidden
                )))
            }
            None => &zeros,
        };
        let step = kernels::lstm_step(
            self.value(x),
            &prev[..hidden],
            &prev[hidden..],
            self.value(w_ih),
            self.value(w_hh),
            self.value(bias),
            hidden,
        );
        let mut out = step.h.clone();
        out.extend_from_slice(&step.c);
        Ok(self.push(
            out,
            Op::Lstm {
                x,
                state,
                w_ih,
                w_hh,
                bias,
                step: Box::new(step),
            },
        ))
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        if start + len > self.dim(x) {
            return Err(Error::Dimension(format!("slice {start}..{} of length {}", start + len, self.dim(x))));
        }
        let value = self.value(x)[start..start + len].to_vec();
        Ok(self.push(value, Op::Slice { x, start }))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let value = parts.iter().flat_map(|p| self.value(*p).iter().copied()).collect();
        self.push(value, Op::Concat(parts.to_vec()))
    }

    /// `W x + b` with `W` shaped `[out, in]`.
    pub fn linear(&mut self, w: NodeId, x: NodeId, bias: Option<NodeId>) -> Result<NodeId> {
        let (out, in_dim) = self.matrix_dims(w, "linear weights")?;
        if self.dim(x) != in_dim {
            return Err(Error::Dimension(format!("linear input has {} values, expected {in_dim}", self.dim(x))));
        }
        if let Some(b) = bias {
            if self.dim(b) != out {
                return Err(Error::Dimension(format!("linear bias has {} values, expected {out}", self.dim(b))));
            }
        }
        let value = kernels::matvec(self.value(w), self.value(x), bias.map(|b| self.value(b)), out);
        Ok(self.push(value, Op::Linear { w, x, bias }))
    }

    /// `Mᵀ x` with `M` shaped `[in, out]`.
    pub fn matvec_t(&mut self, m: NodeId, x: NodeId) -> Result<NodeId> {
        let (in_dim, out) = self.matrix_dims(m, "matrix")?;
        if self.dim(x) != in_dim {
            return Err(Error::Dimension(format!("Mᵀx input has {} values, expected {in_dim}", self.dim(x))));
        }
        let value = kernels::matvec_t(self.value(m), self.value(x), out);
        Ok(self.push(value, Op::MatVecT { m, x }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len(a, b, "add")?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).iter().map(|v| v.tanh()).collect();
        self.push(value, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).iter().map(|v| kernels::sigmoid(*v)).collect();
        self.push(value, Op::Sigmoid(x))
    }

    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let value = kernels::softmax(self.value(x));
        self.push(value, Op::Softmax(x))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len(a, b, "dot")?;
        let v: f64 = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).sum();
        Ok(self.push(vec![v], Op::Dot(a, b)))
    }

    /// `Σ weights[k] * rows[k]`.
    pub fn weighted_sum(&mut self, weights: NodeId, rows: &[NodeId]) -> Result<NodeId> {
        if self.dim(weights) != rows.len() || rows.is_empty() {
            return Err(Error::Dimension(format!(
                "{} weights for {} rows",
                self.dim(weights),
                rows.len()
            )));
        }
        let d = self.dim(rows[0]);
        if rows.iter().any(|r| self.dim(*r) != d) {
            return Err(Error::Dimension("weighted sum rows differ in length".into()));
        }
        let mut value = vec![0.0; d];
        for (w, r) in self.value(weights).iter().zip(rows) {
            for (acc, v) in value.iter_mut().zip(self.value(*r)) {
                *acc += w * v;
            }
        }
        Ok(self.push(
            value,
            Op::WeightedSum {
                weights,
                rows: rows.to_vec(),
            },
        ))
    }

    /// Elementwise product with a fixed mask (dropout).
    pub fn mask(&mut self, x: NodeId, mask: Vec<f64>) -> Result<NodeId> {
        if mask.len() != self.dim(x) {
            return Err(Error::Dimension(format!("mask of {} for vector of {}", mask.len(), self.dim(x))));
        }
        let value = self.value(x).iter().zip(&mask).map(|(a, m)| a * m).collect();
        Ok(self.push(value, Op::Mask { x, mask }))
    }

    /// `-ln max(p[target], ε)`.
    pub fn nll(&mut self, probs: NodeId, target: usize) -> Result<NodeId> {
        let p = *self
            .value(probs)
            .get(target)
            .ok_or_else(|| Error::Dimension(format!("target class {target} outside distribution")))?;
        Ok(self.push(vec![-p.max(PROB_EPS).ln()], Op::Nll { probs, target }))
    }

    /// Binary cross-entropy of a single probability against a boolean target.
    pub fn bce(&mut self, prob: NodeId, target: bool) -> Result<NodeId> {
        if self.dim(prob) != 1 {
            return Err(Error::Dimension("binary cross-entropy expects one probability".into()));
        }
        let p = self.value(prob)[0];
        let q = if target { p } else { 1.0 - p };
        Ok(self.push(vec![-q.max(PROB_EPS).ln()], Op::Bce { prob, target }))
    }

    pub fn sum(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.iter().any(|p| self.dim(*p) != 1) {
            return Err(Error::Dimension("sum expects scalar operands".into()));
        }
        let v = parts.iter().map(|p| self.value(*p)[0]).sum();
        Ok(self.push(vec![v], Op::Sum(parts.to_vec())))
    }

    pub fn scale(&mut self, x: NodeId, k: f64) -> NodeId {
        let value = self.value(x).iter().map(|v| v * k).collect();
        self.push(value, Op::Scale { x, k })
    }

    /// Gradients of the scalar `loss` with respect to every stored parameter.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let store = self
            .store
            .ok_or_else(|| Error::InvalidArgument("backward on a graph without parameters".into()))?;
        if loss.0 >= self.nodes.len() {
            return Err(Error::InvalidArgument("backward called before the loss was computed".into()));
        }
        if self.dim(loss) != 1 {
            return Err(Error::Dimension("backward needs a scalar loss".into()));
        }
        let mut out = Gradients::zeros_like(store);
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Const => {}
                Op::Param(idx) => out.grads[*idx] = Some(g),
                Op::Embed { table, row } => {
                    let (rows, dim) = (self.shape(*table)[0], self.shape(*table)[1]);
                    let buf = slot(&mut grads, *table, rows * dim);
                    for (a, b) in buf[row * dim..(row + 1) * dim].iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Lstm { x, state, w_ih, w_hh, bias, step } => {
                    self.lstm_backward(&mut grads, &g, *x, *state, *w_ih, *w_hh, *bias, step);
                }
                Op::Slice { x, start } => {
                    let n = self.dim(*x);
                    let buf = slot(&mut grads, *x, n);
                    for (a, b) in buf[*start..start + g.len()].iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.dim(*p);
                        add_into(slot(&mut grads, *p, n), &g[off..off + n]);
                        off += n;
                    }
                }
                Op::Linear { w, x, bias } => {
                    let (out_dim, in_dim) = (self.shape(*w)[0], self.shape(*w)[1]);
                    let (wv, xv) = (self.value(*w), self.value(*x));
                    let dw = slot(&mut grads, *w, out_dim * in_dim);
                    for r in 0..out_dim {
                        for k in 0..in_dim {
                            dw[r * in_dim + k] += g[r] * xv[k];
                        }
                    }
                    let dx = slot(&mut grads, *x, in_dim);
                    for r in 0..out_dim {
                        for k in 0..in_dim {
                            dx[k] += wv[r * in_dim + k] * g[r];
                        }
                    }
                    if let Some(b) = bias {
                        add_into(slot(&mut grads, *b, out_dim), &g);
                    }
                }
                Op::MatVecT { m, x } => {
                    let (in_dim, out_dim) = (self.shape(*m)[0], self.shape(*m)[1]);
                    let (mv, xv) = (self.value(*m), self.value(*x));
                    let dm = slot(&mut grads, *m, in_dim * out_dim);
                    for k in 0..in_dim {
                        for j in 0..out_dim {
                            dm[k * out_dim + j] += xv[k] * g[j];
                        }
                    }
                    let dx = slot(&mut grads, *x, in_dim);
                    for k in 0..in_dim {
                        dx[k] += (0..out_dim).map(|j| mv[k * out_dim + j] * g[j]).sum::<f64>();
                    }
                }
                Op::Add(a, b) => {
                    add_into(slot(&mut grads, *a, g.len()), &g);
                    add_into(slot(&mut grads, *b, g.len()), &g);
                }
                Op::Tanh(x) => {
                    let y = &self.nodes[i].value;
                    let d: Vec<f64> = g.iter().zip(y).map(|(gy, y)| gy * (1.0 - y * y)).collect();
                    add_into(slot(&mut grads, *x, d.len()), &d);
                }
                Op::Sigmoid(x) => {
                    let y = &self.nodes[i].value;
                    let d: Vec<f64> = g.iter().zip(y).map(|(gy, y)| gy * y * (1.0 - y)).collect();
                    add_into(slot(&mut grads, *x, d.len()), &d);
                }
                Op::Softmax(x) => {
                    let y = &self.nodes[i].value;
                    let inner: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    let d: Vec<f64> = g.iter().zip(y).map(|(gy, y)| y * (gy - inner)).collect();
                    add_into(slot(&mut grads, *x, d.len()), &d);
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let da: Vec<f64> = bv.iter().map(|v| g[0] * v).collect();
                    let db: Vec<f64> = av.iter().map(|v| g[0] * v).collect();
                    add_into(slot(&mut grads, *a, da.len()), &da);
                    add_into(slot(&mut grads, *b, db.len()), &db);
                }
                Op::WeightedSum { weights, rows } => {
                    let wv = self.value(*weights);
                    let dw: Vec<f64> = rows
                        .iter()
                        .map(|r| self.value(*r).iter().zip(&g).map(|(a, b)| a * b).sum())
                        .collect();
                    for (r, w) in rows.iter().zip(wv) {
                        let d: Vec<f64> = g.iter().map(|gy| w * gy).collect();
                        add_into(slot(&mut grads, *r, d.len()), &d);
                    }
                    add_into(slot(&mut grads, *weights, dw.len()), &dw);
                }
                Op::Mask { x, mask } => {
                    let d: Vec<f64> = g.iter().zip(mask).map(|(a, m)| a * m).collect();
                    add_into(slot(&mut grads, *x, d.len()), &d);
                }
                Op::Nll { probs, target } => {
                    let n = self.dim(*probs);
                    let p = self.value(*probs)[*target];
                    let buf = slot(&mut grads, *probs, n);
                    if p > PROB_EPS {
                        buf[*target] -= g[0] / p;
                    }
                }
                Op::Bce { prob, target } => {
                    let p = self.value(*prob)[0];
                    let q = if *target { p } else { 1.0 - p };
                    let buf = slot(&mut grads, *prob, 1);
                    if q > PROB_EPS {
                        buf[0] += if *target { -g[0] / q } else { g[0] / q };
                    }
                }
                Op::Sum(parts) => {
                    for p in parts {
                        slot(&mut grads, *p, 1)[0] += g[0];
                    }
                }
                Op::Scale { x, k } => {
                    let d: Vec<f64> = g.iter().map(|v| v * k).collect();
                    add_into(slot(&mut grads, *x, d.len()), &d);
                }
            }
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn lstm_backward(
        &self,
        grads: &mut [Option<Vec<f64>>],
        g: &[f64],
        x: NodeId,
        state: Option<NodeId>,
        w_ih: NodeId,
        w_hh: NodeId,
        bias: NodeId,
        step: &LstmStep,
    ) {
        let hidden = step.h.len();
        let xv = self.value(x);
        let in_dim = xv.len();
        let zeros = vec![0.0; hidden];
        let h_prev = state.map_or(zeros.as_slice(), |s| &self.value(s)[..hidden]);
        let gates = &step.gates;

        let mut dz = vec![0.0; 4 * hidden];
        let mut dc_prev = vec![0.0; hidden];
        for j in 0..hidden {
            let (ig, fg, gg, og) = (gates[j], gates[hidden + j], gates[2 * hidden + j], gates[3 * hidden + j]);
            let (dh, dc) = (g[j], g[hidden + j]);
            let tc = step.tanh_c[j];
            let d_o = dh * tc;
            let dct = dc + dh * og * (1.0 - tc * tc);
            dz[j] = dct * gg * ig * (1.0 - ig);
            dz[hidden + j] = dct * step.c_prev[j] * fg * (1.0 - fg);
            dz[2 * hidden + j] = dct * ig * (1.0 - gg * gg);
            dz[3 * hidden + j] = d_o * og * (1.0 - og);
            dc_prev[j] = dct * fg;
        }

        let dw_ih = slot(grads, w_ih, 4 * hidden * in_dim);
        for (r, dzr) in dz.iter().enumerate() {
            for (k, xk) in xv.iter().enumerate() {
                dw_ih[r * in_dim + k] += dzr * xk;
            }
        }
        let dw_hh = slot(grads, w_hh, 4 * hidden * hidden);
        for (r, dzr) in dz.iter().enumerate() {
            for (k, hk) in h_prev.iter().enumerate() {
                dw_hh[r * hidden + k] += dzr * hk;
            }
        }
        add_into(slot(grads, bias, 4 * hidden), &dz);

        let w_ih_v = self.value(w_ih);
        let dx = slot(grads, x, in_dim);
        for (r, dzr) in dz.iter().enumerate() {
            for k in 0..in_dim {
                dx[k] += w_ih_v[r * in_dim + k] * dzr;
            }
        }
        if let Some(s) = state {
            let w_hh_v = self.value(w_hh);
            let ds = slot(grads, s, 2 * hidden);
            for (r, dzr) in dz.iter().enumerate() {
                for k in 0..hidden {
                    ds[k] += w_hh_v[r * hidden + k] * dzr;
                }
            }
            add_into(&mut ds[hidden..], &dc_prev);
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}

/// Per-parameter gradients aligned with a [`ParamStore`]. Parameters the loss
/// does not reach have no entry and read as exact zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    sizes: Vec<usize>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            grads: vec![None; store.len()],
            sizes: (0..store.len()).map(|i| store.tensor(i).len()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<&[f64]> {
        self.grads[idx].as_deref()
    }

    /// Dense copy of one parameter's gradient.
    pub fn dense(&self, idx: usize) -> Vec<f64> {
        self.grads[idx].clone().unwrap_or_else(|| vec![0.0; self.sizes[idx]])
    }

    pub fn add_assign(&mut self, other: &Gradients) -> Result<()> {
        if self.sizes != other.sizes {
            return Err(Error::Dimension("gradient sets belong to different parameter stores".into()));
        }
        for (mine, theirs) in self.grads.iter_mut().zip(&other.grads) {
            if let Some(t) = theirs {
                match mine {
                    Some(m) => add_into(m, t),
                    None => *mine = Some(t.clone()),
                }
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, k: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.iter_mut().for_each(|v| *v *= k);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().flatten().flat_map(|g| g.iter()).all(|v| v.is_finite())
    }
}
